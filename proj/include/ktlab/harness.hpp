#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ktlab/disorder.hpp"
#include "ktlab/kt_solver.hpp"
#include "ktlab/lattice.hpp"

namespace ktlab {

inline constexpr int kManifestSchemaVersion = 1;

/// Everything needed to regenerate a report. Stored as `key = value` lines.
///
/// `size = 3` selects the one-interior-site box; other sizes must be even.
/// `M = 0` means the automatic scale 1/(2|h|).
struct RunManifest {
  int schema_version = kManifestSchemaVersion;
  int dim = 2;
  int size = 4;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  Distribution distribution = Distribution::Gaussian;
  double J0 = 0.0;
  double J = 1.0;
  std::vector<double> h = {0.05, 0.1};
  int w_max = 4;
  int k_max = 6;
  double M = 0.0;
  double tol = 1e-12;
  int max_iter = 200;
  double beta = 50.0;
  std::string out;
  std::string timestamp;

  SolverConfig solver_config() const;
};

/// Throws std::invalid_argument on out-of-range parameters.
void validate(const RunManifest& m);

void write_manifest(std::ostream& os, const RunManifest& m);
RunManifest read_manifest(std::istream& is);
void save_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest load_manifest(const std::filesystem::path& path);

/// FNV-1a over the canonical parameter text; `out` and `timestamp` are
/// excluded so reruns of the same experiment share the hash.
std::string manifest_hash(const RunManifest& m);

/// Commented block echoing the manifest and its hash.
void write_report_header(std::ostream& os, std::string_view title, const RunManifest& m);

/// Shortest text that parses back to the same double.
std::string format_double(double x);
/// "1,2,5-8" style lists.
std::vector<std::uint64_t> parse_seed_list(std::string_view text);
std::string format_seed_list(const std::vector<std::uint64_t>& seeds);

Lattice manifest_lattice(const RunManifest& m);

enum class CellStatus { Ok, NonConverged, Degenerate, Precondition, Error };
std::string to_string(CellStatus s);

struct CompareRow {
  std::uint64_t seed = 0;
  double h = 0.0;
  CellStatus status = CellStatus::Ok;
  std::string message;
  double E_cl = 0.0;
  double gap1 = 0.0;
  std::optional<double> E0_kt;
  std::optional<double> E0_ed;
  std::optional<double> abs_error;
  std::optional<double> overlap;
  int iterations = 0;
  std::optional<double> norm_g;
  std::optional<double> lipschitz;
  std::optional<double> ed_gap;
  /// Two-level formula, single-site systems only.
  std::optional<double> closed_form;
};

std::vector<CompareRow> run_compare(const RunManifest& m);
void write_compare_csv(std::ostream& os, const RunManifest& m,
                       const std::vector<CompareRow>& rows);

struct SweepCell {
  std::uint64_t seed = 0;
  double h = 0.0;
  CellStatus status = CellStatus::Ok;
  int iterations = 0;
  std::optional<double> E0_kt;
  std::optional<double> ed_gap;
};

struct SweepSeed {
  std::uint64_t seed = 0;
  /// Largest grid value whose iteration converged.
  std::optional<double> largest_converged_h;
  /// Smallest grid value whose iteration failed.
  std::optional<double> first_failure_h;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<SweepSeed> seeds;
};

/// Requires an ascending h grid.
SweepResult sweep_h(const RunManifest& m);
void write_sweep_csv(std::ostream& os, const RunManifest& m, const SweepResult& r);

struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifySummary {
  std::vector<CheckLine> checks;
  bool passed() const;
};

struct VerifyOptions {
  int probes_per_cell = 20;
  std::vector<double> lemma1_betas = {1.0, 5.0, 10.0, 25.0};
  /// Largest interior treated with dense spectra.
  int max_dense_interior = 12;
};

/// Uniqueness, positivity, bond consistency, Duhamel correlations and
/// contraction probes for every seed; failures are collected, never thrown.
VerifySummary verify_suite(const RunManifest& m, const VerifyOptions& opts = {});
void write_verify_report(std::ostream& os, const RunManifest& m, const VerifySummary& s);

/// Runs `fn(i)` for i in [0, n) on a pool of hardware threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ktlab
