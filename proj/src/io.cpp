#include "blowup/io.hpp"

#include "blowup/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace blowup::io {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

json parse_with_position(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << source << ":" << line << ":" << col << ": JSON parse error: " << e.what();
    throw IoError(os.str());
  }
}

[[noreturn]] void field_error(const std::string& source, const std::string& path, const std::string& msg) {
  throw IoError(source + ": field '" + path + "': " + msg);
}

double number(const json& j, const std::string& source, const std::string& path) {
  if (!j.is_number()) field_error(source, path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) field_error(source, path, "non-finite number");
  return v;
}

const json& array_of(const json& j, std::size_t len, const std::string& source, const std::string& path) {
  if (!j.is_array() || j.size() != len)
    field_error(source, path, "expected an array of length " + std::to_string(len));
  return j;
}

void check_keys(const json& obj, const std::vector<std::string>& allowed, const std::string& source,
                const std::string& path) {
  if (!obj.is_object()) field_error(source, path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& a : allowed) ok = ok || a == it.key();
    if (!ok) field_error(source, path.empty() ? it.key() : path + "." + it.key(), "unknown field");
  }
  for (const auto& a : allowed)
    if (!obj.contains(a)) field_error(source, path.empty() ? a : path + "." + a, "missing field");
}

}  // namespace

CurvatureFile parse_curvature_json(const std::string& text, const std::string& source,
                                   bool allow_exploratory) {
  const json root = parse_with_position(text, source);
  check_keys(root, {"n", "points"}, source, "");
  if (!root["n"].is_number_integer()) field_error(source, "n", "expected an integer");
  CurvatureFile f;
  f.n = root["n"].get<int>();
  geometry::Dim dim = [&] {
    try {
      return geometry::Dim(f.n, allow_exploratory);
    } catch (const Error& e) {
      field_error(source, "n", e.what());
    }
  }();
  const int m = dim.boundary();
  if (!root["points"].is_array()) field_error(source, "points", "expected an array");
  std::size_t idx = 0;
  for (const json& p : root["points"]) {
    const std::string base = "points[" + std::to_string(idx++) + "]";
    check_keys(p, {"label", "Rbar", "S", "D2", "Rnnnn", "Wbar2", "gamma"}, source, base);
    geometry::CurvaturePoint cp = geometry::CurvaturePoint::zero(dim);
    if (!p["label"].is_string()) field_error(source, base + ".label", "expected a string");
    cp.label = p["label"].get<std::string>();
    const json& R = array_of(p["Rbar"], m, source, base + ".Rbar");
    for (int i = 0; i < m; ++i) {
      const std::string pi = base + ".Rbar[" + std::to_string(i) + "]";
      const json& Ri = array_of(R[i], m, source, pi);
      for (int k = 0; k < m; ++k) {
        const std::string pk = pi + "[" + std::to_string(k) + "]";
        const json& Rk = array_of(Ri[k], m, source, pk);
        for (int j = 0; j < m; ++j) {
          const std::string pj = pk + "[" + std::to_string(j) + "]";
          const json& Rj = array_of(Rk[j], m, source, pj);
          for (int l = 0; l < m; ++l) cp.Rbar(i, k, j, l) = number(Rj[l], source, pj + "[" + std::to_string(l) + "]");
        }
      }
    }
    const json& S = array_of(p["S"], m, source, base + ".S");
    for (int i = 0; i < m; ++i) {
      const std::string pi = base + ".S[" + std::to_string(i) + "]";
      const json& Si = array_of(S[i], m, source, pi);
      for (int j = 0; j < m; ++j) cp.S(i, j) = number(Si[j], source, pi + "[" + std::to_string(j) + "]");
    }
    cp.D2 = number(p["D2"], source, base + ".D2");
    cp.Rnnnn = number(p["Rnnnn"], source, base + ".Rnnnn");
    cp.Wbar2 = number(p["Wbar2"], source, base + ".Wbar2");
    cp.gamma = number(p["gamma"], source, base + ".gamma");
    f.points.push_back(std::move(cp));
  }
  return f;
}

CurvatureFile read_curvature_file(const std::string& path, bool allow_exploratory) {
  return parse_curvature_json(read_text(path), path, allow_exploratory);
}

std::string curvature_json(const CurvatureFile& file) {
  ojson root;
  root["n"] = file.n;
  ojson pts = ojson::array();
  for (const auto& cp : file.points) {
    const int m = cp.n.boundary();
    ojson p;
    p["label"] = cp.label;
    ojson R = ojson::array();
    for (int i = 0; i < m; ++i) {
      ojson Ri = ojson::array();
      for (int k = 0; k < m; ++k) {
        ojson Rk = ojson::array();
        for (int j = 0; j < m; ++j) {
          ojson Rj = ojson::array();
          for (int l = 0; l < m; ++l) Rj.push_back(cp.Rbar(i, k, j, l));
          Rk.push_back(std::move(Rj));
        }
        Ri.push_back(std::move(Rk));
      }
      R.push_back(std::move(Ri));
    }
    p["Rbar"] = std::move(R);
    ojson S = ojson::array();
    for (int i = 0; i < m; ++i) {
      ojson row = ojson::array();
      for (int j = 0; j < m; ++j) row.push_back(cp.S(i, j));
      S.push_back(std::move(row));
    }
    p["S"] = std::move(S);
    p["D2"] = cp.D2;
    p["Rnnnn"] = cp.Rnnnn;
    p["Wbar2"] = cp.Wbar2;
    p["gamma"] = cp.gamma;
    pts.push_back(std::move(p));
  }
  root["points"] = std::move(pts);
  return root.dump() + "\n";
}

// ---------------------------------------------------------------- RunConfig

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("config: " + m); };
  geometry::Dim(n, exploratory);
  if (!(tol_quad > 0.0) || !(tol_sym > 0.0) || !(tol_solver > 0.0)) fail("tolerances must be positive");
  if (grid_nodes < 8) fail("grid_nodes must be at least 8");
  if (!(grid_extent > 0.0) || !(grid_map_scale > 0.0)) fail("grid extent and map scale must be positive");
  if (!(identity_delta_start > 0.0) || !(residual_delta_start > 0.0) || !(delta_ratio > 1.0))
    fail("delta ladder needs start > 0 and ratio > 1");
  if (delta_count < 5) fail("delta ladder needs at least five points");
  if (std::pow(delta_ratio, delta_count - 1) < std::pow(10.0, 1.5) * (1 - 1e-12))
    fail("delta ladder must span at least 1.5 decades");
  if (!(eps_start > 0.0 && eps_start < 1.0) || !(eps_ratio > 0.0 && eps_ratio < 1.0) || eps_count < 1)
    fail("epsilon ladder needs start in (0,1), ratio in (0,1) and count >= 1");
  if (!(cutoff_radius > 0.0)) fail("cutoff_radius must be positive");
  if (residual_samples < 1000) fail("residual_samples must be at least 1000");
  if (slopes != "both" && slopes != "identity" && slopes != "none")
    fail("slopes must be 'both', 'identity' or 'none'");
  if (jet != "random" && jet != "isotropic") fail("jet must be 'random' or 'isotropic'");
  if (!(jet_scale >= 0.0) || !(epsilon_scale > 0.0)) fail("jet_scale >= 0 and epsilon_scale > 0 required");
  if (weyl_denominator != "proof" && weyl_denominator != "lemma") fail("weyl_denominator must be 'proof' or 'lemma'");
  if (rii_convention != "summed" && rii_convention != "per_index")
    fail("rii_convention must be 'summed' or 'per_index'");
  if (battery_size < 1 || !(battery_scale > 0.0)) fail("battery_size >= 1 and battery_scale > 0 required");
}

namespace {
std::vector<double> geometric(double start, double ratio, int count) {
  std::vector<double> v;
  for (int k = 0; k < count; ++k) v.push_back(start * std::pow(ratio, k));
  return v;
}
}  // namespace

std::vector<double> RunConfig::identity_ladder() const {
  return geometric(identity_delta_start, delta_ratio, delta_count);
}
std::vector<double> RunConfig::residual_ladder() const {
  return geometric(residual_delta_start, delta_ratio, delta_count);
}
std::vector<double> RunConfig::eps_ladder() const { return geometric(eps_start, eps_ratio, eps_count); }

energy::WeylDenominator RunConfig::weyl() const {
  return weyl_denominator == "lemma" ? energy::WeylDenominator::Lemma : energy::WeylDenominator::Proof;
}
geometry::RiiConvention RunConfig::rii() const {
  return rii_convention == "per_index" ? geometry::RiiConvention::PerIndex : geometry::RiiConvention::Summed;
}

namespace {

struct Field {
  std::function<void(const RunConfig&, ojson&)> put;
  std::function<void(RunConfig&, const json&, const std::string&)> get;
};

template <class T>
Field make_field(const char* key, T RunConfig::*member) {
  std::string k = key;
  return Field{[k, member](const RunConfig& c, ojson& j) { j[k] = c.*member; },
               [k, member](RunConfig& c, const json& v, const std::string& src) {
                 if constexpr (std::is_same_v<T, std::string>) {
                   if (!v.is_string()) field_error(src, k, "expected a string");
                 } else if constexpr (std::is_same_v<T, bool>) {
                   if (!v.is_boolean()) field_error(src, k, "expected a boolean");
                 } else if constexpr (std::is_integral_v<T>) {
                   if (!v.is_number_integer()) field_error(src, k, "expected an integer");
                 } else {
                   if (!v.is_number()) field_error(src, k, "expected a number");
                 }
                 c.*member = v.get<T>();
               }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f = [] {
    std::vector<std::pair<std::string, Field>> v;
#define BLOWUP_FIELD(name) v.emplace_back(#name, make_field(#name, &RunConfig::name))
    BLOWUP_FIELD(n);
    BLOWUP_FIELD(seed);
    BLOWUP_FIELD(exploratory);
    BLOWUP_FIELD(tol_quad);
    BLOWUP_FIELD(tol_sym);
    BLOWUP_FIELD(tol_solver);
    BLOWUP_FIELD(grid_nodes);
    BLOWUP_FIELD(grid_extent);
    BLOWUP_FIELD(grid_map_scale);
    BLOWUP_FIELD(identity_delta_start);
    BLOWUP_FIELD(residual_delta_start);
    BLOWUP_FIELD(delta_ratio);
    BLOWUP_FIELD(delta_count);
    BLOWUP_FIELD(eps_start);
    BLOWUP_FIELD(eps_ratio);
    BLOWUP_FIELD(eps_count);
    BLOWUP_FIELD(phi_bound_constant);
    BLOWUP_FIELD(cutoff_radius);
    BLOWUP_FIELD(residual_samples);
    BLOWUP_FIELD(slopes);
    BLOWUP_FIELD(jet);
    BLOWUP_FIELD(jet_scale);
    BLOWUP_FIELD(epsilon_scale);
    BLOWUP_FIELD(weyl_denominator);
    BLOWUP_FIELD(rii_convention);
    BLOWUP_FIELD(battery_size);
    BLOWUP_FIELD(battery_scale);
    BLOWUP_FIELD(input);
    BLOWUP_FIELD(results);
    BLOWUP_FIELD(neighborhood);
    BLOWUP_FIELD(output_dir);
#undef BLOWUP_FIELD
    return v;
  }();
  return f;
}

}  // namespace

std::string config_json(const RunConfig& cfg) {
  ojson j = ojson::object();
  for (const auto& [k, f] : fields()) f.put(cfg, j);
  return j.dump(2) + "\n";
}

std::vector<std::string> config_keys() {
  std::vector<std::string> k;
  for (const auto& f : fields()) k.push_back(f.first);
  return k;
}

RunConfig parse_config_json(const std::string& text, const RunConfig& base, const std::string& source) {
  const json j = parse_with_position(text, source);
  if (!j.is_object()) throw IoError(source + ": expected a JSON object");
  RunConfig cfg = base;
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool found = false;
    for (const auto& [k, f] : fields())
      if (k == it.key()) {
        f.get(cfg, it.value(), source);
        found = true;
      }
    if (!found) field_error(source, it.key(), "unknown field");
  }
  return cfg;
}

RunConfig read_config_file(const std::string& path, const RunConfig& base) {
  return parse_config_json(read_text(path), base, path);
}

// ---------------------------------------------------------------- results CSV

std::vector<energy::ReducedCoefficients> parse_results_csv(const std::string& text, const std::string& source) {
  static const std::string header = "label,n,A,B,I2,I4,pairing,G2,G3,phi,slope_residual,slope_identity";
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != header) throw IoError(source + ":1: unexpected header");
  std::vector<energy::ReducedCoefficients> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) throw IoError(source + ":" + std::to_string(lineno) + ": expected 12 columns");
    auto num = [&](int c) {
      const char* s = cells[c].c_str();
      char* end = nullptr;
      const double v = std::strtod(s, &end);
      if (end == s || *end != '\0')
        throw IoError(source + ":" + std::to_string(lineno) + ": column " + std::to_string(c + 1) + " is not a number");
      return v;
    };
    energy::ReducedCoefficients r;
    r.label = cells[0];
    r.n = static_cast<int>(num(1));
    r.A = num(2);
    r.B = num(3);
    r.I2 = num(4);
    r.I4 = num(5);
    r.pairing = num(6);
    r.G2 = num(7);
    r.G3 = num(8);
    r.phi = num(9);
    r.slope_residual = num(10);
    r.slope_identity = num(11);
    rows.push_back(r);
  }
  return rows;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::error_code ec;
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace blowup::io
