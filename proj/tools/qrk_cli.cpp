// qrk: command-line front end for the quantile Kaczmarz library.
//
// Exit codes: 0 success, 1 usage error, 2 runtime or I/O error,
// 3 verification failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "qrk/corruption.hpp"
#include "qrk/error.hpp"
#include "qrk/experiment.hpp"
#include "qrk/matrix_io.hpp"
#include "qrk/solvers.hpp"
#include "qrk/spectral.hpp"
#include "qrk/verify.hpp"

namespace {

using namespace qrk;
namespace fs = std::filesystem;

constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr int kVerifyFailed = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::ParameterDomain:
    case ErrorKind::BetaOutOfRange:
    case ErrorKind::MassOutOfRange:
    case ErrorKind::BadDimensions:
    case ErrorKind::BadSubsetSize:
    case ErrorKind::EmptyQuantile:
      return kUsage;
    default:
      return kRuntime;
  }
}

template <class T>
const T& need(const std::optional<T>& v, const char* flag) {
  if (!v) throw UsageError(std::string("missing required option --") + flag);
  return *v;
}

/// Runs `body` with stdout or the named file as the destination.
template <class F>
void with_output(const std::optional<std::string>& path, F&& body) {
  if (!path || *path == "-") {
    body(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream os(*path);
  if (!os) throw Error(ErrorKind::Io, "cannot write '" + *path + "'");
  body(os);
  if (!os) throw Error(ErrorKind::Io, "write to '" + *path + "' failed");
}

CorruptedSystem read_input(const std::optional<std::string>& path) {
  if (!path || *path == "-") return read_system(std::cin);
  return load_system(*path);
}

struct Options {
  std::optional<std::string> in, out, config, strategy, model, method, methods, verify, system;
  std::optional<std::size_t> m, n, t, max_iters, trials, budget, threads;
  std::optional<double> q, beta, p, stop_tol, magnitude, mass;
  std::optional<std::uint64_t> seed;
  std::optional<bool> traces;
  bool csv = false;
  bool beta_max = false;
};

void add_shape(CLI::App* c, Options& o) {
  c->add_option("--m", o.m, "Number of rows");
  c->add_option("--n", o.n, "Number of columns");
}

void add_solver(CLI::App* c, Options& o) {
  c->add_option("--strategy", o.strategy, "uniform | quantile | sampled-quantile | motzkin | powered");
  c->add_option("--q", o.q, "Quantile in (0, 1)");
  c->add_option("--t", o.t, "Sample size for sampled-quantile");
  c->add_option("--p", o.p, "Exponent for powered selection");
  c->add_option("--max-iters", o.max_iters, "Iteration budget");
  c->add_option("--stop-tol", o.stop_tol, "Stop once ||x - x_true|| <= tol");
}

/// Flags of the experiment family, applied on top of --config as key = value.
void add_experiment(CLI::App* c, Options& o) {
  c->add_option("--config", o.config, "Experiment config file");
  add_shape(c, o);
  c->add_option("--seed", o.seed, "Master seed");
  c->add_option("--system", o.system, "System file used by every trial");
  c->add_option("--beta", o.beta, "Corruption fraction");
  c->add_option("--corruption,--model", o.model, "Corruption model");
  c->add_option("--magnitude", o.magnitude, "Corruption size");
  c->add_option("--methods", o.methods, "Comma-separated strategies");
  c->add_option("--q", o.q, "Quantile");
  c->add_option("--t", o.t, "Sample size for sampled-quantile");
  c->add_option("--p", o.p, "Exponent for powered selection");
  c->add_option("--max-iters", o.max_iters, "Iteration budget");
  c->add_option("--stop-tol", o.stop_tol, "Oracle stopping tolerance");
  c->add_option("--trials", o.trials, "Number of trials");
  c->add_option("--out", o.out, "Output directory");
  c->add_option("--verify", o.verify, "Comma-separated checks");
  c->add_option("--threads", o.threads, "Worker threads");
  c->add_option("--traces", o.traces, "Write per-trial traces (true/false)");
}

harness::ExperimentConfig experiment_config(const Options& o) {
  harness::ExperimentConfig c;
  if (o.config) {
    try {
      c = harness::load_config(*o.config);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ParseError) throw UsageError(*o.config + ": " + e.message());
      throw;
    }
  }
  std::map<std::string, std::string> flags;
  const auto put = [&](const char* key, const auto& v) {
    if (!v) return;
    if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, double>) {
      flags[key] = io::format_double(*v);
    } else if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, bool>) {
      flags[key] = *v ? "true" : "false";
    } else if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, std::string>) {
      flags[key] = *v;
    } else {
      flags[key] = std::to_string(*v);
    }
  };
  put("m", o.m);
  put("n", o.n);
  put("seed", o.seed);
  put("system", o.system);
  put("beta", o.beta);
  put("corruption", o.model);
  put("magnitude", o.magnitude);
  put("methods", o.methods);
  put("q", o.q);
  put("t", o.t);
  put("p", o.p);
  put("max_iters", o.max_iters);
  put("stop_tol", o.stop_tol);
  put("trials", o.trials);
  put("out", o.out);
  put("verify", o.verify);
  put("threads", o.threads);
  put("traces", o.traces);
  for (const auto& [key, value] : flags) c.set(key, value);
  return c;
}

int cmd_generate(const Options& o) {
  const auto system = generate_gaussian_system(need(o.m, "m"), need(o.n, "n"), need(o.seed, "seed"));
  with_output(o.out, [&](std::ostream& os) { write_system(os, system); });
  return 0;
}

int cmd_corrupt(const Options& o) {
  const auto base = read_input(o.in);
  CorruptionSpec spec;
  spec.beta = need(o.beta, "beta");
  spec.model = parse_corruption_model(need(o.model, "model"));
  spec.magnitude = o.magnitude;
  spec.seed = need(o.seed, "seed");
  const auto system = corrupt(base, spec);
  with_output(o.out, [&](std::ostream& os) { write_system(os, system); });
  return 0;
}

int cmd_solve(const Options& o) {
  const auto system = read_input(o.in);
  SolverConfig c;
  c.strategy = parse_strategy(need(o.strategy, "strategy"));
  if (c.strategy == Strategy::Quantile || c.strategy == Strategy::SampledQuantile) c.q = need(o.q, "q");
  if (c.strategy == Strategy::SampledQuantile) c.t = need(o.t, "t");
  if (c.strategy == Strategy::Powered) c.p = need(o.p, "p");
  if (c.strategy != Strategy::Motzkin) c.seed = need(o.seed, "seed");
  c.max_iters = need(o.max_iters, "max-iters");
  c.stop_tol = o.stop_tol.value_or(0.0);
  const auto trace = run_on_system(system, c);
  with_output(o.out, [&](std::ostream& os) { write_trace_csv(os, trace); });
  std::cerr << "status=" << to_string(trace.status) << " iterations=" << trace.records.size()
            << " final_err_sq=" << io::format_double(trace.final_err_sq()) << '\n';
  return 0;
}

spectral::SubsetMethod subset_method(const Options& o) {
  const std::string name = o.method.value_or("exact");
  if (name == "exact") return spectral::SubsetMethod::exact();
  if (name == "sampled") return spectral::SubsetMethod::sampled(need(o.budget, "budget"), need(o.seed, "seed"));
  if (name == "greedy") return spectral::SubsetMethod::greedy(need(o.budget, "budget"), need(o.seed, "seed"));
  throw UsageError("unknown subset method '" + name + "' (exact | sampled | greedy)");
}

Matrix spectral_input(const Options& o) {
  if (o.in) return read_input(o.in).a.matrix();
  if (o.m || o.n) return generate_gaussian_system(need(o.m, "m"), need(o.n, "n"), need(o.seed, "seed")).a.matrix();
  return read_input(std::nullopt).a.matrix();
}

int cmd_spectral(const Options& o) {
  const Matrix a = spectral_input(o);
  const auto summary = spectral::summarize(a, need(o.q, "q"), need(o.beta, "beta"), subset_method(o), o.beta_max);
  with_output(o.out, [&](std::ostream& os) {
    if (o.csv) {
      spectral::write_summary_csv(os, summary);
    } else {
      spectral::write_summary(os, summary);
    }
  });
  return 0;
}

int cmd_heuristic(const Options& o) {
  // --q alone: the largest beta for which the condition holds under the heuristic.
  if (!o.mass && !o.beta) {
    const double q = need(o.q, "q");
    const double star = spectral::corollary_threshold(q);
    with_output(o.out, [&](std::ostream& os) {
      os << "q=" << io::format_double(q) << '\n' << "beta_star=" << io::format_double(star) << '\n';
    });
    return 0;
  }
  const double mass = o.mass ? *o.mass : need(o.q, "q") - *o.beta;
  const auto h = spectral::heuristic(mass);
  with_output(o.out, [&](std::ostream& os) {
    os << "mass=" << io::format_double(h.mass) << '\n'
       << "alpha=" << io::format_double(h.alpha) << '\n'
       << "ratio=" << io::format_double(h.ratio) << '\n';
  });
  return 0;
}

int cmd_check_condition(const Options& o) {
  const double q = need(o.q, "q");
  const double beta = need(o.beta, "beta");
  const double lhs = spectral::condition_lhs(q, beta);
  const double heuristic_rhs = spectral::heuristic_ratio(q - beta);
  with_output(o.out, [&](std::ostream& os) {
    os << "q=" << io::format_double(q) << '\n'
       << "beta=" << io::format_double(beta) << '\n'
       << "condition_lhs=" << io::format_double(lhs) << '\n'
       << "heuristic_rhs=" << io::format_double(heuristic_rhs) << '\n'
       << "heuristic_condition=" << (lhs < heuristic_rhs ? "holds" : "fails") << '\n'
       << "beta_star=" << io::format_double(spectral::corollary_threshold(q)) << '\n';
    if (o.in || o.m) {
      const auto s = spectral::summarize(spectral_input(o), q, beta, subset_method(o));
      os << "condition_rhs=" << io::format_double(s.condition_rhs) << '\n'
         << "sigma_sub_min_method=" << spectral::to_string(s.sigma_sub_min_method) << '\n'
         << "condition=" << (s.rate_c ? "holds" : "fails") << '\n'
         << "certified=" << (s.certified() ? "true" : "false") << '\n';
      if (s.rate_c) os << "rate_c=" << io::format_double(*s.rate_c) << '\n';
    }
  });
  return 0;
}

int cmd_experiment(const Options& o) {
  const auto c = experiment_config(o);
  c.validate(true);
  const auto rows = harness::run_experiment(c);
  std::cout << "wrote " << (*c.out / "summary.csv").string() << " (" << rows.size() << " runs)\n";
  return 0;
}

int cmd_compare(const Options& o) {
  const auto c = experiment_config(o);
  c.validate(false);
  harness::write_compare_csv(std::cout, harness::compare_methods(c));
  return 0;
}

int cmd_verify(const Options& o) {
  const auto c = experiment_config(o);
  const auto report = harness::verify(c);
  harness::write_report(std::cout, report);
  if (c.out) {
    fs::create_directories(*c.out);
    std::ofstream os(*c.out / "verify.txt");
    if (!os) throw Error(ErrorKind::Io, "cannot write verify.txt");
    harness::write_report(os, report);
  }
  return report.passed() ? 0 : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantile-based randomized Kaczmarz for corrupted linear systems"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("generate", "Write a consistent Gaussian system with unit rows");
  add_shape(gen, o);
  gen->add_option("--seed", o.seed, "Seed");
  gen->add_option("--out", o.out, "System file (default stdout)");

  auto* cor = app.add_subcommand("corrupt", "Corrupt the right-hand side of a system");
  cor->add_option("--in", o.in, "System file (default stdin)");
  cor->add_option("--beta", o.beta, "Fraction of corrupted equations");
  cor->add_option("--model", o.model, "random-gaussian | constant-offset | sign-flip | aligned-cluster");
  cor->add_option("--magnitude", o.magnitude, "Corruption size");
  cor->add_option("--seed", o.seed, "Seed");
  cor->add_option("--out", o.out, "System file (default stdout)");

  auto* sol = app.add_subcommand("solve", "Run one Kaczmarz variant and write its trace CSV");
  sol->add_option("--in", o.in, "System file (default stdin)");
  add_solver(sol, o);
  sol->add_option("--seed", o.seed, "Seed of the row picks");
  sol->add_option("--out", o.out, "Trace CSV (default stdout)");

  auto* spe = app.add_subcommand("spectral", "Singular values and the convergence condition of a matrix");
  spe->add_option("--in", o.in, "System file (default stdin unless --m/--n given)");
  add_shape(spe, o);
  spe->add_option("--q", o.q, "Quantile");
  spe->add_option("--beta", o.beta, "Corruption fraction");
  spe->add_option("--method", o.method, "exact | sampled | greedy (default exact)");
  spe->add_option("--budget,--trials", o.budget, "Subsets (sampled) or directions (greedy)");
  spe->add_option("--seed", o.seed, "Seed for generation and sampled methods");
  spe->add_flag("--beta-max", o.beta_max, "Also compute the largest singular value over beta-subsets");
  spe->add_flag("--csv", o.csv, "CSV instead of key=value lines");
  spe->add_option("--out", o.out, "Output file (default stdout)");

  auto* heu = app.add_subcommand("heuristic", "Gaussian heuristic for the subset singular value ratio");
  heu->add_option("--mass", o.mass, "Central Gaussian mass in (0, 1)");
  heu->add_option("--q", o.q, "Quantile; alone it reports the corollary threshold beta_star");
  heu->add_option("--beta", o.beta, "Corruption fraction (mass = q - beta)");
  heu->add_option("--out", o.out, "Output file (default stdout)");

  auto* chk = app.add_subcommand("check-condition", "Evaluate the convergence condition at (q, beta)");
  chk->add_option("--q", o.q, "Quantile");
  chk->add_option("--beta", o.beta, "Corruption fraction");
  chk->add_option("--in", o.in, "Optional system file for the matrix-dependent side");
  add_shape(chk, o);
  chk->add_option("--method", o.method, "exact | sampled | greedy (default exact)");
  chk->add_option("--budget,--trials", o.budget, "Subsets or directions");
  chk->add_option("--seed", o.seed, "Seed");
  chk->add_option("--out", o.out, "Output file (default stdout)");

  auto* exp = app.add_subcommand("experiment", "Run seeded trials and write trace and summary CSVs");
  add_experiment(exp, o);
  auto* cmp = app.add_subcommand("compare", "Median and IQR of final error per method");
  add_experiment(cmp, o);
  auto* ver = app.add_subcommand("verify", "Check the per-iterate bounds along quantile runs");
  add_experiment(ver, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(o);
    if (cor->parsed()) return cmd_corrupt(o);
    if (sol->parsed()) return cmd_solve(o);
    if (spe->parsed()) return cmd_spectral(o);
    if (heu->parsed()) return cmd_heuristic(o);
    if (chk->parsed()) return cmd_check_condition(o);
    if (exp->parsed()) return cmd_experiment(o);
    if (cmp->parsed()) return cmd_compare(o);
    if (ver->parsed()) return cmd_verify(o);
  } catch (const UsageError& e) {
    std::cerr << "qrk: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "qrk: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "qrk: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
