#include "qrk/verify.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "qrk/error.hpp"
#include "qrk/matrix_io.hpp"

namespace qrk::harness {

void CheckResult::record(double lhs, double rhs, double slack) {
  const double margin = lhs - rhs;
  ++instances;
  worst_margin = std::max(worst_margin, margin);
  if (!(margin <= slack)) ++violations;
}

void CheckResult::merge(const CheckResult& other) {
  instances += other.instances;
  violations += other.violations;
  worst_margin = std::max(worst_margin, other.worst_margin);
}

std::string_view to_string(CertificateStatus s) noexcept {
  switch (s) {
    case CertificateStatus::NotRequested: return "not-requested";
    case CertificateStatus::Certified: return "certified";
    case CertificateStatus::ConditionFails: return "unavailable-condition-fails";
    case CertificateStatus::OutsideDomain: return "unavailable-outside-domain";
  }
  return "unknown";
}

bool VerificationReport::passed() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed(); });
}

void VerificationReport::merge(const VerificationReport& other) {
  for (const auto& c : other.checks) {
    auto it = std::find_if(checks.begin(), checks.end(), [&](const CheckResult& x) { return x.name == c.name; });
    if (it == checks.end()) {
      checks.push_back(c);
    } else {
      it->merge(c);
    }
  }
  theorem.insert(theorem.end(), other.theorem.begin(), other.theorem.end());
  states += other.states;
}

const CheckResult* VerificationReport::find(std::string_view name) const noexcept {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

double lemma1_bound(double sigma_max, double err, std::size_t m, double q, double beta) {
  return sigma_max * err / std::sqrt(static_cast<double>(m) * (1.0 - q - beta));
}

double lemma2_factor(double sigma_max, std::size_t corrupted_in_quantile, std::size_t m, double q,
                     double beta) {
  const double slack = 1.0 - q - beta;
  return 1.0 + sigma_max * sigma_max /
                   (std::sqrt(static_cast<double>(corrupted_in_quantile)) * std::sqrt(static_cast<double>(m))) *
                   (2.0 / std::sqrt(slack) + std::sqrt(beta) / slack);
}

double lemma3_factor(double sigma_min_clean, std::size_t m, double q) {
  return 1.0 - sigma_min_clean * sigma_min_clean / (q * static_cast<double>(m));
}

VerificationReport verify_instance(const CorruptedSystem& system, const SolverConfig& config,
                                   const VerifyFlags& flags) {
  if (config.strategy != Strategy::Quantile) {
    throw Error(ErrorKind::Usage, "verification runs the exact quantile strategy");
  }
  const std::size_t m = system.rows();
  const double q = config.q;
  const double beta = static_cast<double>(ceil_count(system.beta, m)) / static_cast<double>(m);
  const double smax = sigma_max(system.a.matrix());

  CheckResult lemma1{"lemma1"}, lemma2{"lemma2"}, lemma3{"lemma3"}, assembled{"assembled"},
      theorem{"theorem_step"}, sv{"sv_rate"};
  const bool lemma1_applies = q < 1.0 - beta;
  const bool lemma2_applies = lemma1_applies;

  TheoremBlock block;
  if (flags.theorem_step) {
    const std::size_t s = spectral::clean_subset_size(q, beta, m);
    const bool in_domain = beta < q && q + beta < 1.0 && s >= 1;
    if (!in_domain) {
      block.status = CertificateStatus::OutsideDomain;
    } else {
      if (spectral::binomial(m, s) > spectral::kMaxExactSubsets) {
        throw Error(ErrorKind::CertificateUnavailable,
                    "exact subset minimum needs C(" + std::to_string(m) + ", " + std::to_string(s) +
                        ") subsets");
      }
      block.summary = spectral::summarize(system.a.matrix(), q, beta, spectral::SubsetMethod::exact());
      block.status = block.summary->certified() ? CertificateStatus::Certified : CertificateStatus::ConditionFails;
    }
  }

  // Uniform Kaczmarz restricted to the rows known to be clean.
  std::vector<std::size_t> clean_rows;
  double sv_factor = 1.0;
  if (flags.sv_rate) {
    for (std::size_t i = 0, c = 0; i < m; ++i) {
      if (c < system.corrupt_set.size() && system.corrupt_set[c] == i) {
        ++c;
      } else {
        clean_rows.push_back(i);
      }
    }
    if (!clean_rows.empty()) {
      const double s = sigma_min(system.a.matrix().select_rows(clean_rows));
      sv_factor = 1.0 - s * s / static_cast<double>(clean_rows.size());
    }
  }

  std::size_t states = 0;
  Vector scratch(system.cols());
  const auto check_state = [&](std::span<const double> x) {
    ++states;
    const auto step = exact_step_expectation(system, x, q);
    const double err_sq = step.err_sq;
    const double err = std::sqrt(err_sq);

    if (flags.lemma1 && lemma1_applies) {
      lemma1.record(step.threshold, lemma1_bound(smax, err, m, q, beta));
    }

    double l2_bound = 0.0, l3_bound = 0.0;
    if (!step.corrupted.empty() && lemma2_applies) {
      l2_bound = lemma2_factor(smax, step.corrupted.size(), m, q, beta) * err_sq;
      if (flags.lemma2) lemma2.record(*step.mean_over_corrupted, l2_bound);
    }
    if (!step.clean.empty()) {
      const double s = sigma_min(system.a.matrix().select_rows(step.clean));
      l3_bound = lemma3_factor(s, m, q) * err_sq;
      if (flags.lemma3) lemma3.record(*step.mean_over_clean, l3_bound);
    }
    if (flags.assembled && (step.corrupted.empty() || lemma2_applies)) {
      const double share = static_cast<double>(step.corrupted.size()) / static_cast<double>(step.admissible.size());
      assembled.record(step.expected_err_sq, share * l2_bound + (1.0 - share) * l3_bound);
    }
    if (block.status == CertificateStatus::Certified) {
      theorem.record(step.expected_err_sq, (1.0 - *block.summary->rate_c) * err_sq);
      if (err_sq > 0.0) block.worst_contraction = std::max(block.worst_contraction, step.expected_err_sq / err_sq);
    }
    if (flags.sv_rate && !clean_rows.empty()) {
      double total = 0.0;
      for (std::size_t i : clean_rows) {
        std::copy(x.begin(), x.end(), scratch.begin());
        project_step_inplace(scratch, system.a.row(i), system.b_observed[i]);
        total += squared_distance(scratch, system.x_true);
      }
      sv.record(total / static_cast<double>(clean_rows.size()), sv_factor * err_sq);
    }
  };

  const auto trace = run_solver(system.a, system.b_observed, config, std::span<const double>(system.x_true),
                                [&](const IterationState& s) { check_state(s.x); });
  check_state(trace.x_final);

  VerificationReport report;
  report.states = states;
  if (flags.lemma1) report.checks.push_back(lemma1);
  if (flags.lemma2) report.checks.push_back(lemma2);
  if (flags.lemma3) report.checks.push_back(lemma3);
  if (flags.assembled) report.checks.push_back(assembled);
  if (flags.theorem_step) report.checks.push_back(theorem);
  if (flags.sv_rate) report.checks.push_back(sv);
  if (flags.theorem_step) report.theorem.push_back(std::move(block));
  return report;
}

void write_report(std::ostream& os, const VerificationReport& report) {
  os << "states=" << report.states << '\n';
  for (const auto& c : report.checks) {
    os << "check=" << c.name << " instances=" << c.instances << " violations=" << c.violations
       << " worst_margin=" << io::format_double(c.worst_margin) << " result=" << (c.passed() ? "pass" : "fail")
       << '\n';
  }
  if (!report.theorem.empty()) {
    std::size_t certified = 0, fails = 0, outside = 0;
    double worst = 0.0, loosest_bound = 0.0;
    for (const auto& t : report.theorem) {
      switch (t.status) {
        case CertificateStatus::Certified:
          ++certified;
          worst = std::max(worst, t.worst_contraction);
          loosest_bound = std::max(loosest_bound, 1.0 - *t.summary->rate_c);
          break;
        case CertificateStatus::ConditionFails: ++fails; break;
        case CertificateStatus::OutsideDomain: ++outside; break;
        case CertificateStatus::NotRequested: break;
      }
    }
    os << "theorem_certified_instances=" << certified << '\n'
       << "theorem_condition_fails_instances=" << fails << '\n'
       << "theorem_outside_domain_instances=" << outside << '\n';
    if (certified > 0) {
      os << "theorem_worst_contraction=" << io::format_double(worst) << '\n'
         << "theorem_largest_one_minus_c=" << io::format_double(loosest_bound) << '\n';
    }
    for (std::size_t k = 0; k < report.theorem.size(); ++k) {
      const auto& t = report.theorem[k];
      os << "instance=" << k << " certificate=" << to_string(t.status);
      if (t.summary) {
        os << " condition_lhs=" << io::format_double(t.summary->condition_lhs)
           << " condition_rhs=" << io::format_double(t.summary->condition_rhs);
        if (t.summary->rate_c) os << " rate_c=" << io::format_double(*t.summary->rate_c);
      }
      os << '\n';
    }
  }
  os << "overall=" << (report.passed() ? "pass" : "fail") << '\n';
}

}  // namespace qrk::harness
