#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qrk/corruption.hpp"
#include "qrk/solvers.hpp"
#include "qrk/spectral.hpp"

namespace qrk::harness {

inline constexpr double kCheckSlack = 1e-9;

/// Which inequalities to evaluate at each visited iterate.
struct VerifyFlags {
  bool lemma1 = true;        // quantile threshold bound
  bool lemma2 = true;        // mean over corrupted admissible rows
  bool lemma3 = true;        // mean over clean admissible rows
  bool assembled = true;     // combination of the two with the state's |S|
  bool theorem_step = false; // E ||x_{k+1} - x||^2 <= (1 - c) ||x_k - x||^2 when certified
  bool sv_rate = false;      // one uniform step over the clean rows

  bool operator==(const VerifyFlags&) const = default;
};

/// One inequality tracked over many states. margin = lhs - rhs; a state
/// violates the check when margin > slack.
struct CheckResult {
  std::string name;
  std::size_t instances = 0;
  std::size_t violations = 0;
  double worst_margin = -std::numeric_limits<double>::infinity();

  void record(double lhs, double rhs, double slack = kCheckSlack);
  void merge(const CheckResult& other);
  bool passed() const noexcept { return violations == 0; }
};

enum class CertificateStatus { NotRequested, Certified, ConditionFails, OutsideDomain };
std::string_view to_string(CertificateStatus s) noexcept;

struct TheoremBlock {
  CertificateStatus status = CertificateStatus::NotRequested;
  std::optional<spectral::SpectralSummary> summary;
  /// Largest observed E||x_{k+1} - x||^2 / ||x_k - x||^2 over states with
  /// nonzero error, to compare against 1 - c.
  double worst_contraction = 0.0;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  std::vector<TheoremBlock> theorem;  // one per verified instance
  std::size_t states = 0;

  bool passed() const noexcept;
  void merge(const VerificationReport& other);
  const CheckResult* find(std::string_view name) const noexcept;
};

/// Runs quantile Kaczmarz on `system` (config.strategy must be Quantile) and
/// evaluates the flagged inequalities at every iterate, including x_0. The
/// corruption fraction used inside the bounds is ceil(beta m)/m.
///
/// Throws CertificateUnavailable if theorem_step is requested and the exact
/// subset minimum is too expensive to enumerate.
VerificationReport verify_instance(const CorruptedSystem& system, const SolverConfig& config,
                                   const VerifyFlags& flags);

/// Right-hand sides of the per-state bounds, exposed for tests.
double lemma1_bound(double sigma_max, double err, std::size_t m, double q, double beta);
double lemma2_factor(double sigma_max, std::size_t corrupted_in_quantile, std::size_t m, double q,
                     double beta);
double lemma3_factor(double sigma_min_clean, std::size_t m, double q);

void write_report(std::ostream& os, const VerificationReport& report);

}  // namespace qrk::harness
