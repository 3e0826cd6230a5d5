#include "qrk/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "qrk/error.hpp"
#include "qrk/matrix_io.hpp"

namespace qrk {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same(double a, double b) noexcept { return a == b || (std::isnan(a) && std::isnan(b)); }

}  // namespace

Vector project_step(std::span<const double> x, std::span<const double> a, double b_i) {
  Vector out(x.begin(), x.end());
  project_step_inplace(out, a, b_i);
  return out;
}

void project_step_inplace(std::span<double> x, std::span<const double> a, double b_i) noexcept {
  const double c = b_i - dot(a, x);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] += c * a[j];
}

std::size_t select_uniform(std::size_t m, Stream& rng) {
  return static_cast<std::size_t>(rng.uniform_index(m));
}

std::size_t select_quantile(std::span<const double> r, double q, Stream& rng) {
  const auto sel = quantile_select(r, q);
  return sel.indices[rng.uniform_index(sel.indices.size())];
}

SampledPick select_quantile_sampled(const std::function<double(std::size_t)>& residual,
                                    std::size_t m, double q, std::size_t t, Stream& rng) {
  if (!(q > 0.0 && q <= 1.0)) throw Error(ErrorKind::ParameterDomain, "quantile q must lie in (0, 1]");
  if (t < 1 || t > m) throw Error(ErrorKind::ParameterDomain, "sample size t must lie in [1, m]");

  std::vector<std::size_t> sample;
  if (t == m) {
    sample.resize(m);
    for (std::size_t i = 0; i < m; ++i) sample[i] = i;
  } else {
    sample = rng.sample_without_replacement(m, t);
  }
  Vector r(t);
  for (std::size_t j = 0; j < t; ++j) r[j] = residual(sample[j]);

  const std::size_t k = std::max<std::size_t>(1, floor_count(q, t));
  // sample is ascending, so position ties coincide with row-index ties
  const auto chosen = smallest_k(r, k);
  double threshold = 0.0;
  for (std::size_t j : chosen) threshold = std::max(threshold, r[j]);
  const std::size_t pick = chosen[rng.uniform_index(chosen.size())];
  return {sample[pick], threshold};
}

std::size_t select_motzkin(std::span<const double> r) {
  if (r.empty()) throw Error(ErrorKind::BadDimensions, "select_motzkin on an empty residual vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i] > r[best]) best = i;
  return best;
}

std::size_t select_powered(std::span<const double> r, double p, Stream& rng) {
  if (!(p >= 0.0)) throw Error(ErrorKind::ParameterDomain, "exponent p must be >= 0");
  const double top = r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
  if (!(top > 0.0)) throw Error(ErrorKind::AllZeroResiduals, "all residuals are zero");

  // Normalizing by the largest residual keeps r^p finite for large p.
  Vector w(r.size());
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    w[i] = std::pow(r[i] / top, p);
    total += w[i];
  }
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (w[i] <= 0.0) continue;
    acc += w[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::Uniform: return "uniform";
    case Strategy::Quantile: return "quantile";
    case Strategy::SampledQuantile: return "sampled-quantile";
    case Strategy::Motzkin: return "motzkin";
    case Strategy::Powered: return "powered";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "sampled_quantile" || name == "sampled") return Strategy::SampledQuantile;
  for (auto s : {Strategy::Uniform, Strategy::Quantile, Strategy::SampledQuantile, Strategy::Motzkin,
                 Strategy::Powered}) {
    if (name == to_string(s)) return s;
  }
  throw Error(ErrorKind::Usage, "unknown strategy '" + std::string(name) + "'");
}

void SolverConfig::validate(std::size_t m, std::size_t n) const {
  const auto bad = [](const std::string& msg) { throw Error(ErrorKind::ParameterDomain, msg); };
  if (max_iters == 0) bad("max_iters must be >= 1");
  if (!(stop_tol >= 0.0)) bad("stop_tol must be >= 0");
  if (!x0.empty() && x0.size() != n) bad("x0 has the wrong length");
  switch (strategy) {
    case Strategy::Quantile:
      if (!(q > 0.0 && q < 1.0)) bad("q must lie in (0, 1)");
      break;
    case Strategy::SampledQuantile:
      if (!(q > 0.0 && q < 1.0)) bad("q must lie in (0, 1)");
      if (t < 1 || t > m) bad("t must lie in [1, m]");
      break;
    case Strategy::Powered:
      if (!(p >= 0.0)) bad("p must be >= 0");
      break;
    case Strategy::Uniform:
    case Strategy::Motzkin:
      break;
  }
}

std::string_view to_string(TraceStatus s) noexcept {
  return s == TraceStatus::Converged ? "Converged" : "BudgetExhausted";
}

bool TraceRecord::operator==(const TraceRecord& o) const {
  return iter == o.iter && same(err_sq, o.err_sq) && same(quantile_q, o.quantile_q) &&
         picked_index == o.picked_index && picked_corrupted == o.picked_corrupted;
}

double ConvergenceTrace::final_err_sq() const noexcept {
  return records.empty() ? initial_err_sq : records.back().err_sq;
}

ConvergenceTrace run_solver(const RowNormalizedMatrix& a, std::span<const double> b,
                            const SolverConfig& config, std::optional<std::span<const double>> x_true,
                            const IterationObserver& observer) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (b.size() != m) throw Error(ErrorKind::DimensionMismatch, "b has the wrong length");
  if (x_true && x_true->size() != n) throw Error(ErrorKind::DimensionMismatch, "x_true has the wrong length");
  config.validate(m, n);

  Stream rng(config.seed, Purpose::SolverPicks);
  Vector x = config.x0.empty() ? Vector(n, 0.0) : config.x0;
  const auto err = [&]() { return x_true ? squared_distance(x, *x_true) : kNaN; };
  const bool oracle_stop = config.stop_tol > 0.0 && x_true.has_value();
  const double stop_sq = config.stop_tol * config.stop_tol;

  ConvergenceTrace trace;
  trace.initial_err_sq = err();
  trace.records.reserve(config.max_iters);
  if (oracle_stop && trace.initial_err_sq <= stop_sq) {
    trace.status = TraceStatus::Converged;
    trace.x_final = std::move(x);
    return trace;
  }

  const auto residual_of = [&](std::size_t i) { return std::abs(dot(a.row(i), x) - b[i]); };
  trace.status = TraceStatus::BudgetExhausted;
  for (std::size_t iter = 1; iter <= config.max_iters; ++iter) {
    if (observer) observer({iter, x});

    std::size_t pick = 0;
    double threshold = kNaN;
    switch (config.strategy) {
      case Strategy::Uniform:
        pick = select_uniform(m, rng);
        break;
      case Strategy::Quantile: {
        const auto r = residuals(a, x, b);
        const auto sel = quantile_select(r, config.q);
        pick = sel.indices[rng.uniform_index(sel.indices.size())];
        threshold = sel.threshold;
        break;
      }
      case Strategy::SampledQuantile: {
        const auto sp = select_quantile_sampled(residual_of, m, config.q, config.t, rng);
        pick = sp.index;
        threshold = sp.threshold;
        break;
      }
      case Strategy::Motzkin:
        pick = select_motzkin(residuals(a, x, b).values);
        break;
      case Strategy::Powered: {
        const auto r = residuals(a, x, b);
        if (std::all_of(r.values.begin(), r.values.end(), [](double v) { return v == 0.0; })) {
          trace.status = TraceStatus::Converged;
          trace.x_final = std::move(x);
          return trace;
        }
        pick = select_powered(r.values, config.p, rng);
        break;
      }
    }

    project_step_inplace(x, a.row(pick), b[pick]);
    const double e = err();
    trace.records.push_back({iter, e, threshold, pick, false});
    if (oracle_stop && e <= stop_sq) {
      trace.status = TraceStatus::Converged;
      break;
    }
  }
  trace.x_final = std::move(x);
  return trace;
}

void annotate_corruption(ConvergenceTrace& trace, std::span<const std::size_t> corrupt_set) {
  for (auto& rec : trace.records) {
    rec.picked_corrupted = std::binary_search(corrupt_set.begin(), corrupt_set.end(), rec.picked_index);
  }
}

ConvergenceTrace run_on_system(const CorruptedSystem& system, const SolverConfig& config,
                               const IterationObserver& observer) {
  auto trace = run_solver(system.a, system.b_observed, config,
                          std::span<const double>(system.x_true), observer);
  annotate_corruption(trace, system.corrupt_set);
  return trace;
}

void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace) {
  os << "iter,err_sq,quantile_Q,picked_index,picked_corrupted,status\n";
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const auto& r = trace.records[k];
    os << r.iter << ',' << io::format_double(r.err_sq) << ',' << io::format_double(r.quantile_q) << ','
       << r.picked_index << ',' << (r.picked_corrupted ? 1 : 0) << ',';
    if (k + 1 == trace.records.size()) os << to_string(trace.status);
    os << '\n';
  }
  if (trace.records.empty()) {
    os << "0," << io::format_double(trace.initial_err_sq) << ",nan,,," << to_string(trace.status) << '\n';
  }
}

StepExpectation exact_step_expectation(const CorruptedSystem& system, std::span<const double> x_k,
                                       double q) {
  if (x_k.size() != system.cols()) throw Error(ErrorKind::DimensionMismatch, "x_k has the wrong length");
  const auto r = residuals(system.a, x_k, system.b_observed);
  const auto sel = quantile_select(r, q);

  StepExpectation out;
  out.err_sq = squared_distance(x_k, system.x_true);
  out.threshold = sel.threshold;
  out.admissible = sel.indices;
  out.err_sq_after.reserve(sel.indices.size());

  double total = 0.0, total_s = 0.0, total_clean = 0.0;
  Vector next(x_k.begin(), x_k.end());
  for (std::size_t i : sel.indices) {
    std::copy(x_k.begin(), x_k.end(), next.begin());
    project_step_inplace(next, system.a.row(i), system.b_observed[i]);
    const double e = squared_distance(next, system.x_true);
    out.err_sq_after.push_back(e);
    total += e;
    if (std::binary_search(system.corrupt_set.begin(), system.corrupt_set.end(), i)) {
      out.corrupted.push_back(i);
      total_s += e;
    } else {
      out.clean.push_back(i);
      total_clean += e;
    }
  }
  out.expected_err_sq = total / static_cast<double>(sel.indices.size());
  if (!out.corrupted.empty()) out.mean_over_corrupted = total_s / static_cast<double>(out.corrupted.size());
  if (!out.clean.empty()) out.mean_over_clean = total_clean / static_cast<double>(out.clean.size());
  return out;
}

}  // namespace qrk

namespace qrk {

bool ConvergenceTrace::operator==(const ConvergenceTrace& o) const {
  return same(initial_err_sq, o.initial_err_sq) && records == o.records && status == o.status &&
         x_final == o.x_final;
}

}  // namespace qrk
