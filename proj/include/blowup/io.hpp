#pragma once

#include "blowup/energy.hpp"
#include "blowup/geometry.hpp"

#include <string>
#include <vector>

namespace blowup::io {

struct CurvatureFile {
  int n = 11;
  std::vector<geometry::CurvaturePoint> points;
};

/// Strict reader: unknown or missing fields and shape mismatches raise IoError
/// naming the field path; malformed JSON reports line and column.
CurvatureFile parse_curvature_json(const std::string& text, const std::string& source = "<input>",
                                   bool allow_exploratory = false);
CurvatureFile read_curvature_file(const std::string& path, bool allow_exploratory = false);
std::string curvature_json(const CurvatureFile& file);

struct RunConfig {
  int n = 11;
  std::uint64_t seed = 1;
  bool exploratory = false;
  // tolerances
  double tol_quad = 1e-10;
  double tol_sym = 1e-12;
  double tol_solver = 1e-8;
  // corrector grid: [0, extent]² with x = map_scale·ξ/(1-ξ), uniform in ξ
  int grid_nodes = 256;
  double grid_extent = 64.0;
  double grid_map_scale = 4.0;
  // δ-ladders: start·ratio^k, k < count
  double identity_delta_start = 0.01;
  double residual_delta_start = 0.001;
  double delta_ratio = 2.0;
  int delta_count = 6;
  // ε-ladder for the family table
  double eps_start = 1e-3;
  double eps_ratio = 0.5;
  int eps_count = 6;
  double phi_bound_constant = 1.0;
  double cutoff_radius = 1.0;
  std::int64_t residual_samples = 200000;
  std::string slopes = "both";  // both, identity or none: slope experiments run by phi/pipeline
  std::string jet = "random";  // random or isotropic
  double jet_scale = 1.0;
  double epsilon_scale = 1.0;
  std::string weyl_denominator = "proof";  // proof: 96(n-1)², lemma: 96(n-1)
  std::string rii_convention = "summed";   // summed or per_index
  // battery generation when no input file is given
  int battery_size = 5;
  double battery_scale = 1.0;
  // io
  std::string input;              // curvature file; empty means a generated battery
  std::string results;            // results CSV for reduce/family; empty means <output_dir>/results.csv
  std::string neighborhood;       // optional JSON neighbourhood for the Hessian check
  std::string output_dir = "out";

  /// Throws ValidationError on out-of-range values.
  void validate() const;
  std::vector<double> identity_ladder() const;
  std::vector<double> residual_ladder() const;
  std::vector<double> eps_ladder() const;
  energy::WeylDenominator weyl() const;
  geometry::RiiConvention rii() const;
};

std::string config_json(const RunConfig& cfg);
/// Field names in serialization order.
std::vector<std::string> config_keys();
/// Strict: unknown keys raise IoError. Missing keys keep `base` values.
RunConfig parse_config_json(const std::string& text, const RunConfig& base = {},
                            const std::string& source = "<config>");
RunConfig read_config_file(const std::string& path, const RunConfig& base = {});

/// Rows of the results CSV written by energy::results_csv.
std::vector<energy::ReducedCoefficients> parse_results_csv(const std::string& text,
                                                           const std::string& source = "<results>");

std::string read_text(const std::string& path);
/// Creates parent directories; IoError on failure.
void write_text(const std::string& path, const std::string& content);

}  // namespace blowup::io
