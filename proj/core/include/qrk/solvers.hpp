#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qrk/corruption.hpp"
#include "qrk/linalg.hpp"
#include "qrk/random.hpp"

namespace qrk {

/// x + (b_i - <a, x>) a for a unit row a: the orthogonal projection of x onto
/// the hyperplane <a, y> = b_i.
Vector project_step(std::span<const double> x, std::span<const double> a, double b_i);
void project_step_inplace(std::span<double> x, std::span<const double> a, double b_i) noexcept;

std::size_t select_uniform(std::size_t m, Stream& rng);

/// Uniform over quantile_select(r, q).indices.
std::size_t select_quantile(std::span<const double> r, double q, Stream& rng);

struct SampledPick {
  std::size_t index;
  double threshold;  // quantile of the sampled residuals
};

/// Estimates the quantile from t rows drawn without replacement and picks
/// uniformly among the max(1, floor(q t)) smallest of them. Only the sampled
/// residuals are evaluated: `residual(i)` is called exactly t times.
///
/// With t = m the sample is the whole index set in order and no random draws
/// are spent on it, so the pick consumes `rng` exactly as select_quantile does.
SampledPick select_quantile_sampled(const std::function<double(std::size_t)>& residual,
                                    std::size_t m, double q, std::size_t t, Stream& rng);

/// Argmax residual, ties to the smallest index.
std::size_t select_motzkin(std::span<const double> r);

/// Index i with probability r_i^p / sum_j r_j^p. Throws AllZeroResiduals when
/// every residual is zero.
std::size_t select_powered(std::span<const double> r, double p, Stream& rng);

enum class Strategy { Uniform, Quantile, SampledQuantile, Motzkin, Powered };

std::string_view to_string(Strategy s) noexcept;
/// Accepts uniform, quantile, sampled-quantile (or sampled_quantile), motzkin, powered.
Strategy parse_strategy(std::string_view name);

struct SolverConfig {
  Strategy strategy = Strategy::Quantile;
  double q = 0.7;
  std::size_t t = 0;   // sample size for SampledQuantile
  double p = 2.0;      // exponent for Powered
  std::size_t max_iters = 1000;
  double stop_tol = 0.0;  // > 0: stop once ||x_k - x_true|| <= stop_tol (needs x_true)
  std::uint64_t seed = 0;
  Vector x0;  // empty means the zero vector

  /// Throws ParameterDomain for q outside (0, 1), t outside [1, m], p < 0,
  /// max_iters = 0, or a mismatched x0.
  void validate(std::size_t m, std::size_t n) const;
};

enum class TraceStatus { Converged, BudgetExhausted };
std::string_view to_string(TraceStatus s) noexcept;

struct TraceRecord {
  std::size_t iter = 0;
  double err_sq = 0.0;      // NaN when no ground truth was supplied
  double quantile_q = 0.0;  // NaN for strategies that form no quantile
  std::size_t picked_index = 0;
  bool picked_corrupted = false;

  bool operator==(const TraceRecord& o) const;
};

struct ConvergenceTrace {
  double initial_err_sq = 0.0;
  std::vector<TraceRecord> records;
  TraceStatus status = TraceStatus::BudgetExhausted;
  Vector x_final;

  double final_err_sq() const noexcept;
  bool operator==(const ConvergenceTrace& o) const;
};

/// Iterate x_k handed to an observer before each step is taken.
struct IterationState {
  std::size_t iter;  // the step about to be taken, 1-based
  std::span<const double> x;
};
using IterationObserver = std::function<void(const IterationState&)>;

/// Runs the configured Kaczmarz variant on (A, b). Reads nothing but A, b and
/// the configuration, so the trace is a function of those alone; x_true only
/// feeds the err_sq column and the optional stop rule.
ConvergenceTrace run_solver(const RowNormalizedMatrix& a, std::span<const double> b,
                            const SolverConfig& config,
                            std::optional<std::span<const double>> x_true = std::nullopt,
                            const IterationObserver& observer = {});

/// Fills picked_corrupted from a known corruption set (verification only).
void annotate_corruption(ConvergenceTrace& trace, std::span<const std::size_t> corrupt_set);

/// run_solver on the observed system, with err_sq tracing and annotation.
ConvergenceTrace run_on_system(const CorruptedSystem& system, const SolverConfig& config,
                               const IterationObserver& observer = {});

/// CSV: iter,err_sq,quantile_Q,picked_index,picked_corrupted,status.
/// The status column is empty except on the last row.
void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace);

/// Exact expectation of ||x_{k+1} - x_true||^2 over one quantile step from x_k,
/// by enumerating the admissible set B. Ground truth required.
struct StepExpectation {
  double err_sq = 0.0;            // ||x_k - x_true||^2
  double expected_err_sq = 0.0;   // uniform mean over B
  double threshold = 0.0;         // Q
  std::vector<std::size_t> admissible;   // B
  std::vector<double> err_sq_after;      // aligned with `admissible`
  std::vector<std::size_t> corrupted;    // S = C ∩ B
  std::vector<std::size_t> clean;        // B \ S
  std::optional<double> mean_over_corrupted;  // absent when S is empty
  std::optional<double> mean_over_clean;      // absent when B \ S is empty
};

StepExpectation exact_step_expectation(const CorruptedSystem& system, std::span<const double> x_k,
                                       double q);

}  // namespace qrk
