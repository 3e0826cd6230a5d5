#include "qrk/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "qrk/error.hpp"
#include "qrk/matrix_io.hpp"
#include "qrk/random.hpp"

namespace qrk::spectral {

std::string_view to_string(Certainty c) noexcept {
  switch (c) {
    case Certainty::Exact: return "exact";
    case Certainty::SampledUpperBound: return "sampled-upper-bound";
    case Certainty::SampledLowerBound: return "sampled-lower-bound";
    case Certainty::GreedyUpperBound: return "greedy-direction-upper-bound";
  }
  return "unknown";
}

std::uint64_t binomial(std::size_t m, std::size_t s) noexcept {
  if (s > m) return 0;
  s = std::min(s, m - s);
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  __uint128_t c = 1;
  for (std::size_t i = 1; i <= s; ++i) {
    c = c * (m - s + i) / i;
    if (c > kMax) return kMax;
  }
  return static_cast<std::uint64_t>(c);
}

namespace {

/// Row outer products, so a subset's Gram matrix is a sum of s precomputed terms.
class GramCache {
 public:
  explicit GramCache(const Matrix& a) : n_(a.cols()), outer_(a.rows() * a.cols() * a.cols()) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      auto r = a.row(i);
      double* o = outer_.data() + i * n_ * n_;
      for (std::size_t j = 0; j < n_; ++j)
        for (std::size_t k = 0; k < n_; ++k) o[j * n_ + k] = r[j] * r[k];
    }
  }

  Matrix subset_gram(std::span<const std::size_t> rows) const {
    Matrix g(n_, n_);
    std::vector<double> acc(n_ * n_, 0.0);
    for (std::size_t i : rows) {
      const double* o = outer_.data() + i * n_ * n_;
      for (std::size_t e = 0; e < n_ * n_; ++e) acc[e] += o[e];
    }
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t k = 0; k < n_; ++k) g(j, k) = acc[j * n_ + k];
    return g;
  }

 private:
  std::size_t n_;
  std::vector<double> outer_;
};

double subset_value(const GramCache& cache, std::span<const std::size_t> rows, std::size_t n,
                    Extremum mode, double tol) {
  if (mode == Extremum::Min && rows.size() < n) return 0.0;
  const Matrix g = cache.subset_gram(rows);
  return mode == Extremum::Min ? sigma_min_from_gram(g, rows.size(), tol) : sigma_max_from_gram(g, tol);
}

bool improves(double candidate, double best, Extremum mode) {
  return mode == Extremum::Min ? candidate < best : candidate > best;
}

void offer(SubsetExtremum& best, bool& have, double value, std::vector<std::size_t> witness,
           Extremum mode) {
  if (!have || improves(value, best.value, mode) ||
      (value == best.value && witness < best.witness)) {
    best.value = value;
    best.witness = std::move(witness);
    have = true;
  }
}

SubsetExtremum exact_extremum(const Matrix& a, std::size_t s, Extremum mode, double tol) {
  const std::size_t m = a.rows();
  const std::uint64_t count = binomial(m, s);
  if (count > kMaxExactSubsets) {
    throw Error(ErrorKind::TooManySubsets, "C(" + std::to_string(m) + ", " + std::to_string(s) +
                                               ") exceeds the exact-enumeration cap");
  }
  const GramCache cache(a);
  std::vector<std::size_t> subset(s);
  for (std::size_t j = 0; j < s; ++j) subset[j] = j;

  SubsetExtremum best;
  best.certainty = Certainty::Exact;
  bool have = false;
  while (true) {
    const double v = subset_value(cache, subset, a.cols(), mode, tol);
    if (!have || improves(v, best.value, mode)) {
      best.value = v;
      best.witness = subset;
      have = true;
      if (mode == Extremum::Min && v == 0.0) break;
    }
    // next combination in lexicographic order
    std::size_t j = s;
    while (j > 0 && subset[j - 1] == m - s + (j - 1)) --j;
    if (j == 0) break;
    ++subset[j - 1];
    for (std::size_t k = j; k < s; ++k) subset[k] = subset[k - 1] + 1;
  }
  return best;
}

}  // namespace

SubsetExtremum sigma_subset_extremal(const Matrix& a, std::size_t s, Extremum mode,
                                     const SubsetMethod& method, double tol) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (s < 1 || s > m) {
    throw Error(ErrorKind::BadSubsetSize,
                "subset size " + std::to_string(s) + " outside [1, " + std::to_string(m) + "]");
  }
  switch (method.kind) {
    case SubsetMethodKind::Exact:
      return exact_extremum(a, s, mode, tol);

    case SubsetMethodKind::Sampled: {
      if (method.budget == 0) throw Error(ErrorKind::ParameterDomain, "sampled method needs trials >= 1");
      const GramCache cache(a);
      Stream rng(method.seed, Purpose::SubsetSampling);
      SubsetExtremum best;
      best.certainty = mode == Extremum::Min ? Certainty::SampledUpperBound : Certainty::SampledLowerBound;
      bool have = false;
      for (std::size_t trial = 0; trial < method.budget; ++trial) {
        auto subset = rng.sample_without_replacement(m, s);
        const double v = subset_value(cache, subset, n, mode, tol);
        offer(best, have, v, std::move(subset), mode);
      }
      return best;
    }

    case SubsetMethodKind::Greedy: {
      if (mode != Extremum::Min) throw Error(ErrorKind::ParameterDomain, "greedy method bounds minima only");
      if (method.budget == 0) throw Error(ErrorKind::ParameterDomain, "greedy method needs directions >= 1");
      Stream rng(method.seed, Purpose::SubsetSampling);
      SubsetExtremum best;
      best.certainty = Certainty::GreedyUpperBound;
      bool have = false;
      Vector x(n);
      Vector proj(m);
      for (std::size_t d = 0; d < method.budget; ++d) {
        double norm2 = 0.0;
        do {
          for (double& v : x) v = rng.normal();
          norm2 = dot(x, x);
        } while (!(norm2 > 1e-20));
        for (double& v : x) v /= std::sqrt(norm2);
        for (std::size_t i = 0; i < m; ++i) {
          const double c = dot(a.row(i), x);
          proj[i] = c * c;
        }
        auto subset = smallest_k(proj, s);
        double total = 0.0;
        for (std::size_t i : subset) total += proj[i];
        offer(best, have, std::sqrt(total), std::move(subset), mode);
      }
      return best;
    }
  }
  throw Error(ErrorKind::ParameterDomain, "unknown subset method");
}

namespace {

void check_domain(double q, double beta) {
  if (!(q > 0.0 && q < 1.0) || !(beta >= 0.0) || !(beta < q) || !(q + beta < 1.0)) {
    throw Error(ErrorKind::ParameterDomain, "need 0 <= beta < q and q + beta < 1 (q = " +
                                                std::to_string(q) + ", beta = " + std::to_string(beta) + ")");
  }
}

double corruption_term(double q, double beta) {
  const double slack = 1.0 - q - beta;
  return 2.0 * std::sqrt(beta) / std::sqrt(slack) + beta / slack;
}

}  // namespace

double condition_lhs(double q, double beta) {
  check_domain(q, beta);
  return q / (q - beta) * corruption_term(q, beta);
}

std::optional<double> convergence_rate(double sigma_max, double sigma_sub_min, double q, double beta,
                                       std::size_t m) {
  check_domain(q, beta);
  if (!(sigma_max >= 0.0) || !(sigma_sub_min >= 0.0) || m == 0) {
    throw Error(ErrorKind::ParameterDomain, "spectral inputs must be nonnegative and m >= 1");
  }
  const double md = static_cast<double>(m);
  const double c = (q - beta) * sigma_sub_min * sigma_sub_min / (q * q * md) -
                   sigma_max * sigma_max / (q * md) * corruption_term(q, beta);
  if (c > 0.0) return c;
  return std::nullopt;
}

std::size_t clean_subset_size(double q, double beta, std::size_t m) noexcept {
  const std::size_t admissible = floor_count(q, m);
  const std::size_t corrupted = ceil_count(beta, m);
  return admissible > corrupted ? admissible - corrupted : 0;
}

SpectralSummary summarize(const Matrix& a, double q, double beta, const SubsetMethod& method,
                          bool with_beta_max, double tol) {
  const std::size_t m = a.rows();
  const std::size_t corrupted = ceil_count(beta, m);
  SpectralSummary out;
  out.q = q;
  out.beta = static_cast<double>(corrupted) / static_cast<double>(m);
  out.condition_lhs = condition_lhs(q, out.beta);
  out.subset_size = clean_subset_size(q, out.beta, m);
  if (out.subset_size == 0) {
    throw Error(ErrorKind::BadSubsetSize, "floor(q m) - ceil(beta m) is not positive");
  }
  out.sigma_max = sigma_max(a, tol);
  auto sub = sigma_subset_extremal(a, out.subset_size, Extremum::Min, method, tol);
  out.sigma_sub_min = sub.value;
  out.sigma_sub_min_method = sub.certainty;
  out.sigma_sub_min_witness = std::move(sub.witness);
  if (out.sigma_sub_min > out.sigma_max + 1e-9) {
    throw Error(ErrorKind::InvariantViolation, "subset minimum exceeds sigma_max");
  }
  if (with_beta_max && corrupted >= 1) {
    const SubsetMethod max_method = method.kind == SubsetMethodKind::Greedy
                                        ? SubsetMethod::sampled(method.budget, method.seed)
                                        : method;
    out.sigma_beta_max = sigma_subset_extremal(a, corrupted, Extremum::Max, max_method, tol).value;
  }
  out.condition_rhs = out.sigma_max > 0.0 ? out.sigma_sub_min * out.sigma_sub_min / (out.sigma_max * out.sigma_max)
                                          : 0.0;
  out.rate_c = convergence_rate(out.sigma_max, out.sigma_sub_min, q, out.beta, m);
  return out;
}

void write_summary(std::ostream& os, const SpectralSummary& s) {
  const auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string("none"); };
  os << "q=" << io::format_double(s.q) << '\n'
     << "beta=" << io::format_double(s.beta) << '\n'
     << "sigma_max=" << io::format_double(s.sigma_max) << '\n'
     << "sigma_sub_min=" << io::format_double(s.sigma_sub_min) << '\n'
     << "sigma_sub_min_method=" << to_string(s.sigma_sub_min_method) << '\n'
     << "subset_size=" << s.subset_size << '\n'
     << "sigma_beta_max=" << opt(s.sigma_beta_max) << '\n'
     << "condition_lhs=" << io::format_double(s.condition_lhs) << '\n'
     << "condition_rhs=" << io::format_double(s.condition_rhs) << '\n'
     << "condition_holds=" << (s.rate_c ? "true" : "false") << '\n'
     << "rate_c=" << opt(s.rate_c) << '\n'
     << "certified=" << (s.certified() ? "true" : "false") << '\n';
}

void write_summary_csv(std::ostream& os, const SpectralSummary& s) {
  const auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); };
  os << "q,beta,sigma_max,sigma_sub_min,sigma_sub_min_method,subset_size,sigma_beta_max,"
        "condition_lhs,condition_rhs,rate_c,certified\n";
  os << io::format_double(s.q) << ',' << io::format_double(s.beta) << ',' << io::format_double(s.sigma_max)
     << ',' << io::format_double(s.sigma_sub_min) << ',' << to_string(s.sigma_sub_min_method) << ','
     << s.subset_size << ',' << opt(s.sigma_beta_max) << ',' << io::format_double(s.condition_lhs) << ','
     << io::format_double(s.condition_rhs) << ',' << opt(s.rate_c) << ',' << (s.certified() ? 1 : 0) << '\n';
}

double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double central_mass(double alpha) noexcept { return std::erf(alpha / std::numbers::sqrt2); }

namespace {
void check_mass(double mass) {
  if (!(mass > 0.0 && mass < 1.0)) {
    throw Error(ErrorKind::MassOutOfRange, "mass must lie in (0, 1), got " + std::to_string(mass));
  }
}
}  // namespace

double heuristic_alpha(double mass) {
  check_mass(mass);
  // central_mass is increasing; [0, 40] brackets every representable mass < 1.
  double lo = 0.0, hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (central_mass(mid) < mass ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double heuristic_ratio(double mass) {
  const double alpha = heuristic_alpha(mass);
  return std::max(0.0, mass - 2.0 * alpha * normal_pdf(alpha));
}

HeuristicResult heuristic(double mass) {
  const double alpha = heuristic_alpha(mass);
  return {mass, alpha, std::max(0.0, mass - 2.0 * alpha * normal_pdf(alpha))};
}

double corollary_threshold(double q) {
  if (!(q > 0.0 && q < 1.0)) return 0.0;
  const auto margin = [q](double beta) { return heuristic_ratio(q - beta) - condition_lhs(q, beta); };
  if (!(margin(0.0) > 0.0)) return 0.0;
  // margin is decreasing in beta: the left side grows, the ratio shrinks with q - beta.
  double lo = 0.0, hi = std::min(q, 1.0 - q);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (margin(mid) > 0.0 ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace qrk::spectral
