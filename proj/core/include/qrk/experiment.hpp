#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qrk/corruption.hpp"
#include "qrk/solvers.hpp"
#include "qrk/verify.hpp"

namespace qrk::harness {

/// Experiment description. Read from a flat `key = value` file (one pair per
/// line, `#` starts a comment) and/or CLI flags of the same names.
///
///   m, n, seed      generate a Gaussian system per trial from the trial seed
///   system          path of a system file to use instead (m, n unused)
///   beta            corruption fraction; with `system` and no beta the file's
///                   own corruption is kept
///   corruption      random-gaussian | constant-offset | sign-flip | aligned-cluster
///   magnitude       optional corruption size (model default otherwise)
///   methods         comma list of uniform, quantile, sampled-quantile, motzkin, powered
///   q, t, p         strategy parameters (required by the methods that use them)
///   max_iters       iteration budget
///   stop_tol        optional; oracle-mode stop on ||x_k - x_true||
///   trials          number of seeded trials
///   out             output directory
///   verify          comma list of lemma1, lemma2, lemma3, assembled, theorem_step, sv_rate
///   threads         optional worker count (default: hardware concurrency)
///   traces          optional true/false, write per-trial trace CSVs (default true)
///
/// Nothing else is defaulted: a required key that is absent is a Usage error.
struct ExperimentConfig {
  std::optional<std::size_t> m, n;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> system;
  std::optional<double> beta;
  std::optional<CorruptionModel> corruption;
  std::optional<double> magnitude;
  std::vector<Strategy> methods;
  std::optional<double> q, p;
  std::optional<std::size_t> t;
  std::optional<std::size_t> max_iters;
  std::optional<double> stop_tol;
  std::optional<std::size_t> trials;
  std::optional<std::filesystem::path> out;
  std::optional<VerifyFlags> verify;
  std::optional<std::size_t> threads;
  bool traces = true;

  /// Sets one key from its text value; throws Usage for unknown keys or
  /// malformed values.
  void set(std::string_view key, std::string_view value);

  /// Throws Usage naming the first missing or inconsistent key.
  void validate(bool need_out) const;

  /// Solver configuration for one method in one trial.
  SolverConfig solver_config(Strategy strategy, std::uint64_t trial_seed) const;
};

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Seed of trial `index` under `master`.
std::uint64_t trial_seed(std::uint64_t master, std::size_t index) noexcept;

/// The (possibly corrupted) system of trial `index`; shared by every method.
CorruptedSystem trial_system(const ExperimentConfig& config, std::size_t index);

struct SummaryRow {
  Strategy method;
  std::size_t trial;
  double final_err_sq;
  std::size_t iterations;
  TraceStatus status;
  double wall_seconds;
};

/// Writes trace_<method>_<trial>.csv per run and summary.csv into `out`.
/// Output other than the wall_time_s column depends only on the config.
std::vector<SummaryRow> run_experiment(const ExperimentConfig& config);

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);

struct MethodStats {
  Strategy method;
  std::size_t trials;
  std::size_t converged;
  double median_final_err_sq;
  double q25_final_err_sq;
  double q75_final_err_sq;
  double median_iterations;
};

/// Per-method median and interquartile range of the final squared error.
std::vector<MethodStats> aggregate(const std::vector<SummaryRow>& rows);

/// Runs every configured method on the same trials and aggregates; writes
/// compare.csv to `out` when set.
std::vector<MethodStats> compare_methods(const ExperimentConfig& config);

void write_compare_csv(std::ostream& os, const std::vector<MethodStats>& stats);

/// verify_instance over every trial, merged in trial order.
VerificationReport verify(const ExperimentConfig& config);

/// Linear-interpolation quantile of `values` (sorted copy), p in [0, 1].
double sample_quantile(std::vector<double> values, double p);

}  // namespace qrk::harness
