#include "qrk/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <ostream>
#include <thread>

#include "qrk/error.hpp"
#include "qrk/matrix_io.hpp"
#include "qrk/random.hpp"

namespace qrk::harness {

namespace {

[[noreturn]] void usage(const std::string& msg) { throw Error(ErrorKind::Usage, msg); }

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T v{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    usage("invalid value '" + std::string(value) + "' for '" + std::string(key) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) usage("non-finite value for '" + std::string(key) + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  usage("invalid boolean '" + std::string(value) + "' for '" + std::string(key) + "'");
}

VerifyFlags parse_verify(std::string_view value) {
  VerifyFlags f{false, false, false, false, false, false};
  for (auto item : split_list(value)) {
    if (item == "lemma1") f.lemma1 = true;
    else if (item == "lemma2") f.lemma2 = true;
    else if (item == "lemma3") f.lemma3 = true;
    else if (item == "assembled") f.assembled = true;
    else if (item == "theorem_step") f.theorem_step = true;
    else if (item == "sv_rate") f.sv_rate = true;
    else if (item == "all") f = {true, true, true, true, true, true};
    else usage("unknown verify check '" + std::string(item) + "'");
  }
  return f;
}

/// Runs fn(0..count-1) on a pool of worker threads. The first exception in
/// index order is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::size_t worker_count(const ExperimentConfig& config) {
  if (config.threads && *config.threads > 0) return *config.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

bool uses(const ExperimentConfig& c, Strategy s) {
  return std::find(c.methods.begin(), c.methods.end(), s) != c.methods.end();
}

}  // namespace

void ExperimentConfig::set(std::string_view key, std::string_view raw) {
  const auto value = trim(raw);
  if (key == "m") m = parse_number<std::size_t>(key, value);
  else if (key == "n") n = parse_number<std::size_t>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "system") system = std::filesystem::path(std::string(value));
  else if (key == "beta") beta = parse_number<double>(key, value);
  else if (key == "corruption") corruption = parse_corruption_model(value);
  else if (key == "magnitude") magnitude = parse_number<double>(key, value);
  else if (key == "methods") {
    methods.clear();
    for (auto item : split_list(value)) methods.push_back(parse_strategy(item));
  } else if (key == "q") q = parse_number<double>(key, value);
  else if (key == "t") t = parse_number<std::size_t>(key, value);
  else if (key == "p") p = parse_number<double>(key, value);
  else if (key == "max_iters" || key == "max-iters") max_iters = parse_number<std::size_t>(key, value);
  else if (key == "stop_tol" || key == "stop-tol") stop_tol = parse_number<double>(key, value);
  else if (key == "trials") trials = parse_number<std::size_t>(key, value);
  else if (key == "out") out = std::filesystem::path(std::string(value));
  else if (key == "verify") verify = parse_verify(value);
  else if (key == "threads") threads = parse_number<std::size_t>(key, value);
  else if (key == "traces") traces = parse_bool(key, value);
  else usage("unknown configuration key '" + std::string(key) + "'");
}

void ExperimentConfig::validate(bool need_out) const {
  const auto missing = [](const char* key) { usage(std::string("missing required key '") + key + "'"); };
  if (!system && !(m && n)) missing(m ? "n" : "m");
  if (!seed) missing("seed");
  if (methods.empty()) missing("methods");
  if (!max_iters) missing("max_iters");
  if (!trials) missing("trials");
  if (*trials < 1) usage("trials must be >= 1");
  if (*max_iters < 1) usage("max_iters must be >= 1");
  if ((uses(*this, Strategy::Quantile) || uses(*this, Strategy::SampledQuantile)) && !q) missing("q");
  if (uses(*this, Strategy::SampledQuantile) && !t) missing("t");
  if (uses(*this, Strategy::Powered) && !p) missing("p");
  if (!system && !beta) missing("beta");
  if (beta && *beta > 0.0 && !corruption) missing("corruption");
  if (need_out && !out) missing("out");
}

SolverConfig ExperimentConfig::solver_config(Strategy strategy, std::uint64_t seed_of_trial) const {
  SolverConfig c;
  c.strategy = strategy;
  c.q = q.value_or(0.5);
  c.t = t.value_or(1);
  c.p = p.value_or(0.0);
  c.max_iters = max_iters.value_or(1);
  c.stop_tol = stop_tol.value_or(0.0);
  c.seed = derive_seed(seed_of_trial, Purpose::SolverPicks);
  return c;
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig config;
  std::string line;
  std::size_t number = 0;
  while (std::getline(is, line)) {
    ++number;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(number) + ": expected 'key = value'");
    }
    try {
      config.set(trim(view.substr(0, eq)), view.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(number) + ": " + e.message());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open config '" + path.string() + "'");
  return parse_config(is);
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t index) noexcept {
  return derive_seed(master, Purpose::Trial, index);
}

CorruptedSystem trial_system(const ExperimentConfig& config, std::size_t index) {
  const std::uint64_t ts = trial_seed(config.seed.value_or(0), index);
  CorruptedSystem base = config.system ? load_system(*config.system)
                                       : generate_gaussian_system(*config.m, *config.n, ts);
  if (!config.beta) return base;
  CorruptionSpec spec;
  spec.beta = *config.beta;
  spec.model = config.corruption.value_or(CorruptionModel::RandomGaussian);
  spec.magnitude = config.magnitude;
  spec.seed = ts;
  return corrupt(base, spec);
}

namespace {

std::vector<SummaryRow> run_trials(const ExperimentConfig& config, bool write_traces) {
  const std::size_t trials = *config.trials;
  const std::size_t methods = config.methods.size();
  std::vector<SummaryRow> rows(trials * methods);

  parallel_for(trials, worker_count(config), [&](std::size_t trial) {
    const auto system = trial_system(config, trial);
    const std::uint64_t ts = trial_seed(*config.seed, trial);
    for (std::size_t k = 0; k < methods; ++k) {
      const Strategy method = config.methods[k];
      const auto start = std::chrono::steady_clock::now();
      const auto trace = run_on_system(system, config.solver_config(method, ts));
      const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
      if (write_traces) {
        const auto path = *config.out / ("trace_" + std::string(to_string(method)) + "_" + std::to_string(trial) + ".csv");
        std::ofstream os(path);
        if (!os) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
        write_trace_csv(os, trace);
      }
      rows[k * trials + trial] = {method, trial, trace.final_err_sq(), trace.records.size(), trace.status,
                                  wall.count()};
    }
  });
  return rows;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());
}

}  // namespace

std::vector<SummaryRow> run_experiment(const ExperimentConfig& config) {
  config.validate(true);
  ensure_dir(*config.out);
  auto rows = run_trials(config, config.traces);
  std::ofstream os(*config.out / "summary.csv");
  if (!os) throw Error(ErrorKind::Io, "cannot write summary.csv");
  write_summary_csv(os, rows);
  return rows;
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "method,trial,final_err_sq,iterations,status,wall_time_s\n";
  for (const auto& r : rows) {
    os << to_string(r.method) << ',' << r.trial << ',' << io::format_double(r.final_err_sq) << ','
       << r.iterations << ',' << to_string(r.status) << ',' << io::format_double(r.wall_seconds) << '\n';
  }
}

double sample_quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<MethodStats> aggregate(const std::vector<SummaryRow>& rows) {
  std::vector<Strategy> order;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);

  std::vector<MethodStats> out;
  for (Strategy s : order) {
    std::vector<double> errs, iters;
    std::size_t converged = 0;
    for (const auto& r : rows) {
      if (r.method != s) continue;
      errs.push_back(r.final_err_sq);
      iters.push_back(static_cast<double>(r.iterations));
      if (r.status == TraceStatus::Converged) ++converged;
    }
    out.push_back({s, errs.size(), converged, sample_quantile(errs, 0.5), sample_quantile(errs, 0.25),
                   sample_quantile(errs, 0.75), sample_quantile(iters, 0.5)});
  }
  return out;
}

std::vector<MethodStats> compare_methods(const ExperimentConfig& config) {
  config.validate(false);
  auto stats = aggregate(run_trials(config, false));
  if (config.out) {
    ensure_dir(*config.out);
    std::ofstream os(*config.out / "compare.csv");
    if (!os) throw Error(ErrorKind::Io, "cannot write compare.csv");
    write_compare_csv(os, stats);
  }
  return stats;
}

void write_compare_csv(std::ostream& os, const std::vector<MethodStats>& stats) {
  os << "method,trials,converged,median_final_err_sq,q25_final_err_sq,q75_final_err_sq,median_iterations\n";
  for (const auto& s : stats) {
    os << to_string(s.method) << ',' << s.trials << ',' << s.converged << ','
       << io::format_double(s.median_final_err_sq) << ',' << io::format_double(s.q25_final_err_sq) << ','
       << io::format_double(s.q75_final_err_sq) << ',' << io::format_double(s.median_iterations) << '\n';
  }
}

VerificationReport verify(const ExperimentConfig& config) {
  if (!config.q) usage("missing required key 'q'");
  ExperimentConfig c = config;
  if (c.methods.empty()) c.methods = {Strategy::Quantile};
  c.validate(false);
  const VerifyFlags flags = c.verify.value_or(VerifyFlags{});
  const std::size_t trials = *c.trials;
  std::vector<VerificationReport> parts(trials);
  parallel_for(trials, worker_count(c), [&](std::size_t trial) {
    const auto system = trial_system(c, trial);
    parts[trial] = verify_instance(system, c.solver_config(Strategy::Quantile, trial_seed(*c.seed, trial)), flags);
  });
  VerificationReport report;
  for (const auto& part : parts) report.merge(part);
  return report;
}

}  // namespace qrk::harness
