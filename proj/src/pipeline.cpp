#include "blowup/pipeline.hpp"

#include "blowup/bubble.hpp"
#include "blowup/corrector.hpp"
#include "blowup/energy.hpp"
#include "blowup/quadrature.hpp"
#include "blowup/reduction.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <sstream>

namespace blowup::pipeline {

using ojson = nlohmann::ordered_json;
using geometry::CurvaturePoint;
using geometry::Dim;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Budget:
    case ErrorKind::Numeric:
      return kNumericFailure;
    case ErrorKind::Io:
      return kIoFailure;
    default:
      return kValidationFailure;
  }
}

CommandResult guarded(const std::function<CommandResult()>& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    CommandResult r;
    r.exit_code = exit_code(e.kind());
    r.messages.push_back(std::string("error (") + to_string(e.kind()) + "): " + e.what());
    return r;
  } catch (const std::exception& e) {
    CommandResult r;
    r.exit_code = kNumericFailure;
    r.messages.push_back(std::string("error: ") + e.what());
    return r;
  }
}

namespace {

std::string out_path(const io::RunConfig& cfg, const std::string& name) {
  return cfg.output_dir.empty() ? name : cfg.output_dir + "/" + name;
}

void emit(CommandResult& res, const std::string& path, const std::string& content) {
  io::write_text(path, content);
  res.files.push_back(path);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

corrector::GridConfig grid_of(const io::RunConfig& cfg) {
  corrector::GridConfig g;
  g.nodes = cfg.grid_nodes;
  g.extent = cfg.grid_extent;
  g.map_scale = cfg.grid_map_scale;
  g.residual_tol = cfg.tol_solver;
  return g;
}

geometry::MetricJet jet_of(const io::RunConfig& cfg, const CurvaturePoint& cp) {
  if (cfg.jet == "isotropic") return geometry::isotropic_jet(cp);
  return geometry::generate_jet(cp, cfg.seed ^ fnv1a(cp.label), cfg.jet_scale, false);
}

std::vector<CurvaturePoint> sorted_points(const io::CurvatureFile& f) {
  std::vector<CurvaturePoint> pts = f.points;
  std::stable_sort(pts.begin(), pts.end(),
                   [](const CurvaturePoint& a, const CurvaturePoint& b) { return a.label < b.label; });
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].label == pts[i - 1].label) throw ValidationError("duplicate point label '" + pts[i].label + "'");
  return pts;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct Quarantine {
  std::vector<std::pair<std::string, std::string>> rows;  // label, reason
  void add(const std::string& label, const std::string& reason) { rows.emplace_back(label, reason); }
  std::string csv() const {
    std::ostringstream os;
    os << "label,reason\n";
    for (const auto& [l, r] : rows) {
      std::string clean = r;
      std::replace(clean.begin(), clean.end(), ',', ';');
      std::replace(clean.begin(), clean.end(), '\n', ' ');
      os << l << ',' << clean << '\n';
    }
    return os.str();
  }
};

struct PointRun {
  std::optional<energy::ReducedCoefficients> coeffs;
  std::optional<energy::IdentityResult> identity;
  std::optional<energy::ResidualResult> residual;
};

// φ and the slope experiments for every valid point; failures are quarantined.
std::map<std::string, PointRun> run_points(const io::RunConfig& cfg, const std::vector<CurvaturePoint>& pts,
                                           Quarantine& q, bool with_phi, const std::string& slopes) {
  std::map<std::string, PointRun> out;
  if (pts.empty()) return out;
  const Dim n = pts.front().n;
  corrector::CorrectorDiagnostics base;
  const corrector::Profile2D profile = corrector::solve_profile(n, grid_of(cfg), &base);
  quadrature::MomentTable moments(n, cfg.tol_quad);
  energy::PhiOptions popt;
  popt.weyl_denominator = cfg.weyl();
  for (const CurvaturePoint& cp : pts) {
    PointRun run;
    try {
      geometry::require_valid(cp, cfg.tol_sym);
      const corrector::CorrectorSolution sol = corrector::attach_pattern(cp, profile, base);
      if (with_phi) run.coeffs = energy::compute_phi(cp, sol, moments, popt);
      if (slopes != "none") {
        const geometry::MetricJet jet = jet_of(cfg, cp);
        energy::IdentityOptions iopt;
        iopt.delta = cfg.identity_ladder();
        iopt.cutoff_radius = cfg.cutoff_radius;
        run.identity = energy::verify_A4_L2_L3_identity(cp, jet, sol, iopt);
        if (run.coeffs) run.coeffs->slope_identity = run.identity->remainder.slope;
        if (slopes == "both") {
          energy::ResidualOptions ropt;
          ropt.delta = cfg.residual_ladder();
          ropt.cutoff_radius = cfg.cutoff_radius;
          ropt.samples = cfg.residual_samples;
          ropt.seed = cfg.seed ^ fnv1a(cp.label);
          ropt.epsilon_scale = cfg.epsilon_scale;
          try {
            run.residual = energy::residual_slope(cp, jet, sol, ropt);
            if (run.coeffs) run.coeffs->slope_residual = run.residual->full.slope;
          } catch (const BudgetError& e) {
            q.add(cp.label, std::string("residual slope skipped: ") + e.what());
          }
        }
      }
      out.emplace(cp.label, std::move(run));
    } catch (const Error& e) {
      q.add(cp.label, std::string(to_string(e.kind())) + ": " + e.what());
    }
  }
  return out;
}

std::string slope_ladders_csv(const std::map<std::string, PointRun>& runs) {
  std::ostringstream os;
  os << "label,experiment,delta,value,error\n" << std::setprecision(17);
  auto put = [&](const std::string& label, const energy::SlopeExperiment& e) {
    for (std::size_t i = 0; i < e.delta.size(); ++i)
      os << label << ',' << e.name << ',' << e.delta[i] << ',' << e.value[i] << ','
         << (i < e.error.size() ? e.error[i] : 0.0) << '\n';
  };
  for (const auto& [label, run] : runs) {
    if (run.identity) put(label, run.identity->remainder);
    if (run.residual) {
      const auto& r = *run.residual;
      for (const auto* e : {&r.full, &r.without_v, &r.second_order, &r.corrector_term, &r.cancelled, &r.combined})
        put(label, *e);
    }
  }
  return os.str();
}

std::string slope_summary_csv(const std::map<std::string, PointRun>& runs) {
  std::ostringstream os;
  os << "label,experiment,slope,stderr,status,passed\n" << std::setprecision(17);
  auto put = [&](const std::string& label, const energy::SlopeExperiment& e, bool pass) {
    os << label << ',' << e.name << ',' << e.slope << ',' << e.slope_stderr << ',' << e.status << ','
       << (pass ? "true" : "false") << '\n';
  };
  for (const auto& [label, run] : runs) {
    if (run.identity) put(label, run.identity->remainder, run.identity->passed());
    if (run.residual) {
      const auto& r = *run.residual;
      const bool p = r.passed();
      for (const auto* e : {&r.full, &r.without_v, &r.second_order, &r.corrector_term, &r.cancelled, &r.combined})
        put(label, *e, p);
    }
  }
  return os.str();
}

std::optional<reduction::HessianReport> neighborhood_hessian(const io::RunConfig& cfg, double B) {
  if (cfg.neighborhood.empty()) return std::nullopt;
  const std::string text = io::read_text(cfg.neighborhood);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(cfg.neighborhood + ": JSON parse error: " + e.what());
  }
  auto vec = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array()) throw IoError(cfg.neighborhood + ": field '" + key + "' must be an array");
    std::vector<double> v;
    for (const auto& x : j[key]) {
      if (!x.is_number()) throw IoError(cfg.neighborhood + ": field '" + key + "' must hold numbers");
      v.push_back(x.get<double>());
    }
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k != "q0" && k != "h" && k != "lower" && k != "upper" && k != "samples")
      throw IoError(cfg.neighborhood + ": field '" + k + "': unknown field");
  }
  if (!j.contains("h") || !j["h"].is_number()) throw IoError(cfg.neighborhood + ": field 'h' must be a number");
  const double h = j["h"].get<double>();
  const Eigen::VectorXd q0 = vec("q0"), lo = vec("lower"), hi = vec("upper");
  if (!j.contains("samples") || !j["samples"].is_array())
    throw IoError(cfg.neighborhood + ": field 'samples' must be an array");
  std::vector<reduction::GridSample> samples;
  for (std::size_t k = 0; k < j["samples"].size(); ++k) {
    const auto& s = j["samples"][k];
    reduction::GridSample g;
    try {
      std::vector<double> qv = s.at("q").get<std::vector<double>>();
      g.q = Eigen::Map<Eigen::VectorXd>(qv.data(), static_cast<Eigen::Index>(qv.size()));
      g.gamma = s.at("gamma").get<double>();
      g.phi = s.at("phi").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError(cfg.neighborhood + ": field 'samples[" + std::to_string(k) + "]': " + e.what());
    }
    samples.push_back(g);
  }
  return reduction::hessian_check(B, reduction::grid_lookup(std::move(samples), h), q0, h, lo, hi);
}

// Reduced functional from curvature (γ) and results (φ, B), merged by label.
reduction::ReducedFunctional merge(const std::vector<CurvaturePoint>& pts,
                                   const std::vector<energy::ReducedCoefficients>& rows, Quarantine& q) {
  reduction::ReducedFunctional rf;
  std::map<std::string, const energy::ReducedCoefficients*> by_label;
  for (const auto& r : rows) by_label[r.label] = &r;
  for (const CurvaturePoint& cp : pts) {
    auto it = by_label.find(cp.label);
    if (it == by_label.end()) {
      q.add(cp.label, "no phi available");
      continue;
    }
    rf.n = cp.n.value();
    rf.B = it->second->B;
    rf.points.push_back({cp.label, cp.gamma, it->second->phi});
  }
  if (rf.points.empty()) throw ValidationError("construction impossible: no point carries phi");
  return rf;
}

struct Reduced {
  reduction::BlowUpFamily fam;
  std::vector<reduction::FamilyRow> rows;
  std::optional<reduction::HessianReport> hessian;
};

Reduced reduce(const io::RunConfig& cfg, const reduction::ReducedFunctional& rf, Quarantine& q) {
  rf.validate();
  std::vector<const reduction::QPoint*> pts;
  for (const auto& p : rf.points) pts.push_back(&p);
  std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->label < b->label; });
  // quarantined before the argmax so the record survives "construction impossible"
  for (const auto* p : pts)
    if (!reduction::admissible(*p))
      q.add(p->label, "inadmissible for the reduction (gamma=" + fmt(p->gamma) + ", phi=" + fmt(p->phi) + ")");
  Reduced r;
  r.fam = reduction::find_blowup_point(rf);
  r.rows = reduction::family_table(r.fam, cfg.eps_ladder(), cfg.phi_bound_constant);
  r.hessian = neighborhood_hessian(cfg, rf.B);
  if (r.hessian) r.fam.stability = r.hessian->classification;
  return r;
}


}  // namespace

io::CurvatureFile load_points(const io::RunConfig& cfg) {
  if (!cfg.input.empty()) return io::read_curvature_file(cfg.input, cfg.exploratory);
  io::CurvatureFile f;
  f.n = cfg.n;
  const Dim n(cfg.n, cfg.exploratory);
  for (int i = 0; i < cfg.battery_size; ++i)
    f.points.push_back(geometry::generate_sample(n, cfg.seed + static_cast<std::uint64_t>(i), cfg.battery_scale));
  return f;
}

// ------------------------------------------------------------------ verify

namespace {

struct SuiteLog {
  ojson suites = ojson::object();
  bool all_pass = true;
  bool budget = false;
  void record(const std::string& name, bool pass, ojson detail) {
    detail["passed"] = pass;
    suites[name] = std::move(detail);
    all_pass = all_pass && pass;
  }
  void run(const std::string& name, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Budget || e.kind() == ErrorKind::Numeric) budget = true;
      record(name, false, {{"error", std::string(to_string(e.kind())) + ": " + e.what()}});
    }
  }
};

std::vector<bubble::HalfSpacePoint> random_halfspace(Dim n, std::uint64_t seed, int count, bool boundary) {
  std::mt19937_64 rng(seed);
  std::cauchy_distribution<double> cauchy(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<bubble::HalfSpacePoint> out;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd z(n.boundary());
    for (int k = 0; k < z.size(); ++k) z(k) = normal(rng);
    const double t = boundary ? 0.0 : std::abs(cauchy(rng));
    out.emplace_back(t, z);
  }
  return out;
}

}  // namespace

CommandResult cmd_verify(const io::RunConfig& cfg) {
  cfg.validate();
  CommandResult res;
  const io::CurvatureFile file = load_points(cfg);
  const Dim n(file.n, cfg.exploratory);
  const std::vector<CurvaturePoint> pts = sorted_points(file);
  SuiteLog log;

  log.run("bubble", [&] {
    auto pts_in = random_halfspace(n, cfg.seed, 10000, false);
    auto pts_bd = random_halfspace(n, cfg.seed + 1, 10000, true);
    pts_in.insert(pts_in.end(), pts_bd.begin(), pts_bd.end());
    const bubble::ResidualReport r = bubble::check_bubble_residual(n, pts_in);
    log.record("bubble", r.passed(1e-12),
               {{"max_interior", r.max_interior}, {"max_boundary", r.max_boundary}, {"tol", 1e-12}});
  });

  log.run("kernel", [&] {
    const int nn = n.value();
    double worst_in = 0.0, worst_bd = 0.0;
    for (const auto& p : random_halfspace(n, cfg.seed + 2, 1000, false)) {
      const double D = (1 + p.t) * (1 + p.t) + p.r() * p.r();
      for (int b = 1; b <= nn; ++b) {
        const double scale = std::abs(bubble::eval_U(n, p)) * nn * nn / D;
        worst_in = std::max(worst_in, std::abs(bubble::eval_kernel_laplacian(n, b, p)) / scale);
      }
    }
    for (const auto& p : random_halfspace(n, cfg.seed + 3, 1000, true)) {
      const double Up = std::pow(bubble::eval_U(n, p), 2.0 / (nn - 2));
      for (int b = 1; b <= nn; ++b) {
        const double j = bubble::eval_kernel(n, b, p), jt = bubble::eval_kernel_dt(n, b, p);
        const double scale = std::abs(jt) + nn * Up * std::abs(j);
        if (scale > 0) worst_bd = std::max(worst_bd, std::abs(jt + nn * Up * j) / scale);
      }
    }
    log.record("kernel", worst_in <= 1e-10 && worst_bd <= 1e-12,
               {{"max_interior", worst_in}, {"max_boundary", worst_bd}});
  });

  log.run("moments", [&] {
    quadrature::MomentTable mt(n, cfg.tol_quad);
    const double nn = n.value();
    const double I1 = mt.I1(), I2 = mt.I2(), I3 = mt.I3();
    const double e1 = std::abs(I1 / I2 / (4 * (nn - 2) / (nn + 1)) - 1);
    const double e3 = std::abs(I3 / I2 / (12 / ((nn - 2) * (nn + 1))) - 1);
    std::vector<int> p4(n.boundary(), 0), p22(n.boundary(), 0);
    p4[0] = 4;
    p22[0] = p22[1] = 2;
    const double M = mt.get({nn, 2, 4}).value;
    const double z4 = quadrature::angular_moment(n, p4) * M;
    const double z22 = quadrature::angular_moment(n, p22) * M;
    const double et = std::abs(z4 / (3 * z22) - 1);
    const double ei = std::abs(z4 / (3 / (nn * nn - 1) * I2) - 1);
    log.record("moments", std::max({e1, e3, et, ei}) <= 1e-6,
               {{"I1_over_I2_rel_error", e1}, {"I3_over_I2_rel_error", e3}, {"t2z4_factor3_rel_error", et},
                {"t2z4_I2_rel_error", ei}});
  });

  log.run("curvature", [&] {
    ojson bad = ojson::array();
    for (const auto& cp : pts) {
      const auto rep = geometry::validate_curvature(cp, cfg.tol_sym);
      if (!rep.passed()) bad.push_back({{"label", cp.label}, {"failures", rep.failures()}});
    }
    log.record("curvature", bad.empty(), {{"invalid", bad}});
  });

  log.run("solvability", [&] {
    double worst = 0.0;
    for (const auto& cp : pts) {
      const auto v = corrector::check_solvability(cp, cfg.tol_quad);
      const double scale = std::max(1.0, cp.S.norm());
      for (double x : v) worst = std::max(worst, std::abs(x) / scale);
    }
    log.record("solvability", worst <= 1e-8, {{"max_abs", worst}, {"tol", 1e-8}});
  });

  log.run("corrector", [&] {
    corrector::CorrectorDiagnostics base;
    const corrector::Profile2D prof = corrector::solve_profile(n, grid_of(cfg), &base);
    ojson rows = ojson::array();
    bool ok = true;
    for (const auto& cp : pts) {
      const auto rep = corrector::verify_corrector(corrector::attach_pattern(cp, prof, base));
      ok = ok && rep.passed();
      rows.push_back({{"label", cp.label},
                      {"decay_exponent", rep.decay_exponent},
                      {"orthogonality", rep.orthogonality},
                      {"pairing", rep.pairing},
                      {"passed", rep.passed()}});
    }
    log.record("corrector", ok, {{"residual", base.residual}, {"sigma_min", base.sigma_min}, {"points", rows}});
  });

  ojson report;
  report["n"] = n.value();
  report["passed"] = log.all_pass;
  report["suites"] = log.suites;
  emit(res, out_path(cfg, "verify.json"), report.dump(2) + "\n");
  for (auto it = log.suites.begin(); it != log.suites.end(); ++it)
    res.messages.push_back(it.key() + ": " + (it.value()["passed"].get<bool>() ? "PASS" : "FAIL"));
  res.exit_code = log.all_pass ? kPass : (log.budget ? kNumericFailure : kValidationFailure);
  return res;
}

// ------------------------------------------------------------------ moments

CommandResult cmd_moments(const io::RunConfig& cfg) {
  cfg.validate();
  CommandResult res;
  const Dim n(cfg.n, cfg.exploratory);
  quadrature::MomentTable mt(n, cfg.tol_quad);
  const double I1 = mt.I1(), I2 = mt.I2(), I3 = mt.I3(), I4 = mt.I4();
  emit(res, out_path(cfg, "moments.csv"), mt.to_csv());
  const double nn = n.value();
  std::ostringstream os;
  os << std::setprecision(17) << "I1=" << I1 << " I2=" << I2 << " I3=" << I3 << " I4=" << I4;
  res.messages.push_back(os.str());
  os.str("");
  os << "I1/I2=" << I1 / I2 << " (expected " << 4 * (nn - 2) / (nn + 1) << "), I3/I2=" << I3 / I2
     << " (expected " << 12 / ((nn - 2) * (nn + 1)) << ")";
  res.messages.push_back(os.str());
  return res;
}

// ------------------------------------------------------------------ solve-vq

CommandResult cmd_solve_vq(const io::RunConfig& cfg) {
  cfg.validate();
  CommandResult res;
  const io::CurvatureFile file = load_points(cfg);
  const std::vector<CurvaturePoint> pts = sorted_points(file);
  if (pts.empty()) throw ValidationError("solve-vq: no curvature points");
  const Dim n = pts.front().n;
  corrector::CorrectorDiagnostics base;
  const corrector::Profile2D prof = corrector::solve_profile(n, grid_of(cfg), &base);
  const corrector::CorrectorSolution first = corrector::attach_pattern(pts.front(), prof, base);
  emit(res, out_path(cfg, "profile.csv"), corrector::profile_csv(prof));
  emit(res, out_path(cfg, "profile.json"), corrector::diagnostics_json(first) + "\n");
  std::ostringstream os;
  os << "label,pairing,orthogonality,decay_exponent,passed\n" << std::setprecision(17);
  bool ok = true;
  for (const auto& cp : pts) {
    const auto rep = corrector::verify_corrector(corrector::attach_pattern(cp, prof, base));
    ok = ok && rep.passed();
    os << cp.label << ',' << rep.pairing << ',' << rep.orthogonality << ',' << rep.decay_exponent << ','
       << (rep.passed() ? "true" : "false") << '\n';
  }
  emit(res, out_path(cfg, "corrector_points.csv"), os.str());
  res.messages.push_back("residual=" + fmt(base.residual) + " sigma_min=" + fmt(base.sigma_min) +
                         " decay=" + fmt(base.decay_exponent));
  res.exit_code = ok ? kPass : kValidationFailure;
  return res;
}

// ------------------------------------------------------------------ phi

CommandResult cmd_phi(const io::RunConfig& cfg) {
  cfg.validate();
  CommandResult res;
  const std::vector<CurvaturePoint> pts = sorted_points(load_points(cfg));
  Quarantine q;
  const auto runs = run_points(cfg, pts, q, true, cfg.slopes);
  std::vector<energy::ReducedCoefficients> rows;
  for (const auto& [label, run] : runs)
    if (run.coeffs) rows.push_back(*run.coeffs);
  emit(res, out_path(cfg, "results.csv"), energy::results_csv(rows));
  emit(res, out_path(cfg, "quarantine.csv"), q.csv());
  for (const auto& [l, r] : q.rows) res.messages.push_back("quarantined " + l + ": " + r);
  res.messages.push_back(std::to_string(rows.size()) + " of " + std::to_string(pts.size()) + " points evaluated");
  res.exit_code = rows.empty() && !pts.empty() ? kValidationFailure : kPass;
  return res;
}

// ------------------------------------------------------------------ reduce / family

namespace {
std::vector<energy::ReducedCoefficients> load_results(const io::RunConfig& cfg) {
  const std::string path = cfg.results.empty() ? out_path(cfg, "results.csv") : cfg.results;
  return io::parse_results_csv(io::read_text(path), path);
}
}  // namespace

CommandResult cmd_reduce(const io::RunConfig& cfg) {
  cfg.validate();
  CommandResult res;
  const std::vector<CurvaturePoint> pts = sorted_points(load_points(cfg));
  Quarantine q;
  const auto rf = merge(pts, load_results(cfg), q);
  const Reduced r = reduce(cfg, rf, q);
  emit(res, out_path(cfg, "reduction.json"), reduction::report_json(r.fam, r.rows, r.hessian ? &*r.hessian : nullptr));
  emit(res, out_path(cfg, "family.csv"), reduction::family_csv(r.rows));
  emit(res, out_path(cfg, "g_curves.csv"), reduction::g_curves_csv(rf));
  res.messages.push_back("q0=" + r.fam.q0 + " lambda0=" + fmt(r.fam.lambda0));
  return res;
}

CommandResult cmd_family(const io::RunConfig& cfg) {
  cfg.validate();
  CommandResult res;
  const std::vector<CurvaturePoint> pts = sorted_points(load_points(cfg));
  Quarantine q;
  const auto rf = merge(pts, load_results(cfg), q);
  const Reduced r = reduce(cfg, rf, q);
  emit(res, out_path(cfg, "family.csv"), reduction::family_csv(r.rows));
  res.messages.push_back("q0=" + r.fam.q0 + " lambda0=" + fmt(r.fam.lambda0) + " rows=" + std::to_string(r.rows.size()));
  return res;
}

// ------------------------------------------------------------------ residual-slope

CommandResult cmd_residual_slope(const io::RunConfig& cfg) {
  cfg.validate();
  CommandResult res;
  const std::vector<CurvaturePoint> pts = sorted_points(load_points(cfg));
  Quarantine q;
  const auto runs = run_points(cfg, pts, q, false, "both");
  emit(res, out_path(cfg, "slope_ladders.csv"), slope_ladders_csv(runs));
  emit(res, out_path(cfg, "slope_summary.csv"), slope_summary_csv(runs));
  bool ok = q.rows.empty();
  for (const auto& [label, run] : runs) {
    const bool pi = run.identity && run.identity->passed();
    const bool pr = run.residual && run.residual->passed();
    ok = ok && pi && pr;
    std::ostringstream os;
    os << label << ": identity slope " << (run.identity ? run.identity->remainder.slope : NAN) << ", residual slope "
       << (run.residual ? run.residual->full.slope : NAN) << ", without V "
       << (run.residual ? run.residual->without_v.slope : NAN) << (pi && pr ? " PASS" : " FAIL");
    res.messages.push_back(os.str());
  }
  for (const auto& [l, r] : q.rows) res.messages.push_back("quarantined " + l + ": " + r);
  res.exit_code = ok ? kPass : (q.rows.empty() ? kValidationFailure : kNumericFailure);
  return res;
}

// ------------------------------------------------------------------ pipeline

CommandResult cmd_pipeline(const io::RunConfig& cfg) {
  cfg.validate();
  CommandResult res;
  const std::vector<CurvaturePoint> pts = sorted_points(load_points(cfg));
  Quarantine q;
  const auto runs = run_points(cfg, pts, q, true, cfg.slopes);
  std::vector<energy::ReducedCoefficients> rows;
  for (const auto& [label, run] : runs)
    if (run.coeffs) rows.push_back(*run.coeffs);
  emit(res, out_path(cfg, "results.csv"), energy::results_csv(rows));
  if (cfg.slopes != "none") emit(res, out_path(cfg, "slope_ladders.csv"), slope_ladders_csv(runs));

  int code = kPass;
  try {
    Quarantine local;
    const auto rf = merge(pts, rows, local);
    const Reduced r = reduce(cfg, rf, q);
    emit(res, out_path(cfg, "reduction.json"),
         reduction::report_json(r.fam, r.rows, r.hessian ? &*r.hessian : nullptr));
    emit(res, out_path(cfg, "family.csv"), reduction::family_csv(r.rows));
    emit(res, out_path(cfg, "g_curves.csv"), reduction::g_curves_csv(rf));
    res.messages.push_back("q0=" + r.fam.q0 + " lambda0=" + fmt(r.fam.lambda0));
  } catch (const ValidationError& e) {
    emit(res, out_path(cfg, "family.csv"), reduction::family_csv({}));
    res.messages.push_back(std::string("no admissible point: ") + e.what());
    code = kValidationFailure;
  }
  emit(res, out_path(cfg, "quarantine.csv"), q.csv());
  for (const auto& [l, r] : q.rows) res.messages.push_back("quarantined " + l + ": " + r);
  res.exit_code = code;
  return res;
}

}  // namespace blowup::pipeline
