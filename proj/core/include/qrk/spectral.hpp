#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "qrk/linalg.hpp"

namespace qrk::spectral {

enum class Extremum { Min, Max };

enum class SubsetMethodKind { Exact, Sampled, Greedy };

struct SubsetMethod {
  SubsetMethodKind kind = SubsetMethodKind::Exact;
  std::size_t budget = 0;  // trials (Sampled) or directions (Greedy)
  std::uint64_t seed = 0;

  static SubsetMethod exact() { return {}; }
  static SubsetMethod sampled(std::size_t trials, std::uint64_t seed) {
    return {SubsetMethodKind::Sampled, trials, seed};
  }
  static SubsetMethod greedy(std::size_t directions, std::uint64_t seed) {
    return {SubsetMethodKind::Greedy, directions, seed};
  }
};

/// How far a reported sub-matrix singular value can be trusted.
enum class Certainty { Exact, SampledUpperBound, SampledLowerBound, GreedyUpperBound };
std::string_view to_string(Certainty c) noexcept;

struct SubsetExtremum {
  double value = 0.0;
  std::vector<std::size_t> witness;  // ascending row indices achieving `value`
  Certainty certainty = Certainty::Exact;
};

inline constexpr std::uint64_t kMaxExactSubsets = 2'000'000;

/// C(m, s), saturating at UINT64_MAX.
std::uint64_t binomial(std::size_t m, std::size_t s) noexcept;

/// Smallest (Min) or largest (Max) singular value over the row-subsets of
/// size s.
///
/// Exact enumerates all C(m, s) subsets in lexicographic order; ties keep the
/// lexicographically smallest witness. Refuses with TooManySubsets above
/// kMaxExactSubsets. Sampled evaluates `budget` uniform random subsets and so
/// bounds a minimum from above and a maximum from below. Greedy (Min only)
/// takes, for each of `budget` random unit directions x, the s rows with the
/// smallest <a_i, x>^2 and scores ||A_S x||; also an upper bound.
SubsetExtremum sigma_subset_extremal(const Matrix& a, std::size_t s, Extremum mode,
                                     const SubsetMethod& method, double tol = kDefaultSpectralTol);

/// q/(q-beta) * (2 sqrt(beta)/sqrt(1-q-beta) + beta/(1-q-beta)).
/// ParameterDomain unless 0 <= beta < q and q + beta < 1.
double condition_lhs(double q, double beta);

/// Per-step contraction deficit
///   c = (q-beta) s_sub^2 / (q^2 m) - s_max^2/(q m) (2 sqrt(beta)/sqrt(1-q-beta) + beta/(1-q-beta)),
/// returned only when positive.
std::optional<double> convergence_rate(double sigma_max, double sigma_sub_min, double q, double beta,
                                       std::size_t m);

/// floor(q m) - ceil(beta m): the guaranteed minimum size of the clean part
/// of the admissible set. 0 when that difference is not positive.
std::size_t clean_subset_size(double q, double beta, std::size_t m) noexcept;

struct SpectralSummary {
  double sigma_max = 0.0;
  double sigma_sub_min = 0.0;
  Certainty sigma_sub_min_method = Certainty::Exact;
  std::vector<std::size_t> sigma_sub_min_witness;
  std::size_t subset_size = 0;
  std::optional<double> sigma_beta_max;
  double condition_lhs = 0.0;
  double condition_rhs = 0.0;
  std::optional<double> rate_c;
  double q = 0.0;
  double beta = 0.0;  // ceil(beta m)/m of the instance

  /// A positive rate is a convergence certificate only when the sub-matrix
  /// minimum was computed exactly.
  bool certified() const noexcept {
    return rate_c.has_value() && sigma_sub_min_method == Certainty::Exact;
  }
};

/// Computes the theorem inputs for A at (q, beta). beta is rounded up to
/// ceil(beta m)/m before use. sigma_beta_max is evaluated with the same method
/// when `with_beta_max` is set and ceil(beta m) >= 1.
SpectralSummary summarize(const Matrix& a, double q, double beta, const SubsetMethod& method,
                          bool with_beta_max = false, double tol = kDefaultSpectralTol);

void write_summary(std::ostream& os, const SpectralSummary& s);
void write_summary_csv(std::ostream& os, const SpectralSummary& s);

/// Standard normal density and the mass P(|Z| <= alpha).
double normal_pdf(double x) noexcept;
double central_mass(double alpha) noexcept;

/// alpha > 0 with P(|Z| <= alpha) = mass. MassOutOfRange unless mass in (0, 1).
double heuristic_alpha(double mass);

/// E[Z^2; |Z| <= alpha] = mass - 2 alpha phi(alpha), the conjectured limit of
/// sigma_sub_min^2 / sigma_max^2 for tall matrices with uniform random rows.
double heuristic_ratio(double mass);

struct HeuristicResult {
  double mass = 0.0;
  double alpha = 0.0;
  double ratio = 0.0;
};
HeuristicResult heuristic(double mass);

/// Largest beta (to 1e-6 or better) with condition_lhs(q, beta) <
/// heuristic_ratio(q - beta); 0 if none.
double corollary_threshold(double q);

}  // namespace qrk::spectral
