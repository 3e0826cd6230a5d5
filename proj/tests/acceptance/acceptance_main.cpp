// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "qrk/corruption.hpp"
#include "qrk/experiment.hpp"
#include "qrk/linalg.hpp"
#include "qrk/random.hpp"
#include "qrk/solvers.hpp"
#include "qrk/spectral.hpp"
#include "qrk/verify.hpp"

using namespace qrk;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* id;
  const char* title;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string drop_last_column(const std::string& csv) {
  std::istringstream is(csv);
  std::string line, out;
  while (std::getline(is, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

int run_cli(const std::string& args, const fs::path& stdout_file) {
  const std::string cmd = std::string("\"") + QRK_CLI_PATH + "\" " + args + " > \"" + stdout_file.string() +
                          "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 1. Largest corruption fraction under the Gaussian heuristic at q = 0.88.
Outcome corollary() {
  const fs::path dir = fs::temp_directory_path() / "qrk_acceptance_ac1";
  fs::create_directories(dir);
  const int rc = run_cli("heuristic --q 0.88", dir / "out.txt");
  const std::string text = slurp(dir / "out.txt");
  const auto pos = text.find("beta_star=");
  if (rc != 0 || pos == std::string::npos) return {false, "CLI failed: " + text};
  const double cli = std::strtod(text.c_str() + pos + 10, nullptr);
  const double lib = spectral::corollary_threshold(0.88);
  const bool pass = cli >= 0.0054 && cli <= 0.0058 && cli == lib;
  return {pass, "beta_star=" + fmt(cli) + " (target [0.0054, 0.0058])"};
}

// 2. Closed-form truncated moment against quadrature; alpha inverts the mass.
Outcome heuristic_internals() {
  double worst_ratio = 0.0, worst_mass = 0.0;
  for (int k = 1; k <= 1000; ++k) {
    const double mass = k / 1001.0;
    const double alpha = spectral::heuristic_alpha(mass);
    worst_mass = std::max(worst_mass, std::abs(oracle::quad_mass(alpha) - mass));
    worst_ratio = std::max(worst_ratio, std::abs(oracle::quad_second_moment(alpha) - spectral::heuristic_ratio(mass)));
  }
  return {worst_ratio <= 1e-9 && worst_mass <= 1e-10,
          "1000 masses: max |ratio - quad|=" + fmt(worst_ratio) + ", max |mass(alpha) - mass|=" + fmt(worst_mass)};
}

// 3. Exact one-step expectation never exceeds (1 - c) err^2 on certified instances.
Outcome theorem_step() {
  harness::VerifyFlags flags{false, false, false, false, true, false};
  harness::VerificationReport total;
  std::size_t certified = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto system = generate_gaussian_system(12, 2, seed);
    SolverConfig c;
    c.strategy = Strategy::Quantile;
    c.q = 0.75;
    c.max_iters = 40;
    c.seed = derive_seed(seed, Purpose::SolverPicks);
    const auto report = harness::verify_instance(system, c, flags);
    certified += report.theorem.front().status == harness::CertificateStatus::Certified;
    total.merge(report);
  }
  const auto* th = total.find("theorem_step");
  const bool pass = certified == 50 && th->instances >= 1000 && th->violations == 0;
  return {pass, std::to_string(certified) + "/50 certified, " + std::to_string(th->instances) + " states, " +
                    std::to_string(th->violations) + " violations, worst margin " + fmt(th->worst_margin)};
}

// 4. Per-iterate lemma bounds on corrupted 200 x 10 systems.
Outcome lemma_suite() {
  harness::VerifyFlags flags{true, true, true, false, false, false};
  harness::VerificationReport total;
  const CorruptionModel models[] = {CorruptionModel::RandomGaussian, CorruptionModel::ConstantOffset,
                                    CorruptionModel::SignFlip, CorruptionModel::AlignedCluster};
  std::size_t instances = 0;
  for (double beta : {0.01, 0.05}) {
    for (auto model : models) {
      for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto system = corrupt(generate_gaussian_system(200, 10, seed),
                                    {beta, model, std::nullopt, derive_seed(seed, Purpose::CorruptionSupport)});
        SolverConfig c;
        c.strategy = Strategy::Quantile;
        c.q = 0.8;
        c.max_iters = 200;
        c.seed = derive_seed(seed, Purpose::SolverPicks);
        total.merge(harness::verify_instance(system, c, flags));
        ++instances;
      }
    }
  }
  std::string detail = std::to_string(instances) + " instances, " + std::to_string(total.states) + " states;";
  bool pass = true;
  for (const auto& check : total.checks) {
    pass = pass && check.passed() && check.instances > 0;
    detail += " " + check.name + " " + std::to_string(check.violations) + "/" + std::to_string(check.instances) +
              " (worst " + fmt(check.worst_margin) + ")";
  }
  return {pass, detail};
}

// 5. Uniform Kaczmarz against the 1 - sigma_min^2 / ||A||_F^2 rate.
Outcome sv_rate() {
  const std::vector<std::size_t> checkpoints{25, 50, 100, 200, 400};
  std::vector<std::vector<double>> ratios(checkpoints.size());
  double mean_bound = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto system = generate_gaussian_system(100, 10, seed);
    const double smin = oracle::sigma_min(system.a.matrix());
    const double bound = 1.0 - smin * smin / 100.0;  // unit rows: ||A||_F^2 = m
    mean_bound += bound / 100.0;
    SolverConfig c;
    c.strategy = Strategy::Uniform;
    c.max_iters = checkpoints.back();
    c.seed = derive_seed(seed, Purpose::SolverPicks);
    const auto trace = run_on_system(system, c);
    for (std::size_t j = 0; j < checkpoints.size(); ++j) {
      const std::size_t k = checkpoints[j];
      ratios[j].push_back(trace.records[k - 1].err_sq / (trace.initial_err_sq * std::pow(bound, double(k))));
    }
  }
  bool pass = true;
  std::string detail = "mean bound " + fmt(mean_bound) + "; E[err_k^2/(err_0^2 rate^k)] at k=";
  for (std::size_t j = 0; j < checkpoints.size(); ++j) {
    const auto& r = ratios[j];
    double mean = 0.0, sq = 0.0;
    for (double v : r) mean += v;
    mean /= double(r.size());
    for (double v : r) sq += (v - mean) * (v - mean);
    const double se = std::sqrt(sq / double(r.size() - 1) / double(r.size()));
    pass = pass && mean <= 1.0 + 3.0 * se;
    detail += std::to_string(checkpoints[j]) + ":" + fmt(mean) + "(se " + fmt(se) + ") ";
  }
  return {pass, detail};
}

// 6. Quantile vs uniform Kaczmarz on 500 x 50 systems with 20% gross corruption.
Outcome robustness() {
  std::vector<double> quantile_err, uniform_err;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto system = corrupt(generate_gaussian_system(500, 50, seed),
                                {0.2, CorruptionModel::RandomGaussian, std::nullopt,
                                 derive_seed(seed, Purpose::CorruptionSupport)});
    SolverConfig c;
    c.max_iters = 200'000;
    c.seed = derive_seed(seed, Purpose::SolverPicks);
    c.strategy = Strategy::Quantile;
    c.q = 0.7;
    quantile_err.push_back(run_on_system(system, c).final_err_sq());
    c.strategy = Strategy::Uniform;
    uniform_err.push_back(run_on_system(system, c).final_err_sq());
  }
  const double mq = harness::sample_quantile(quantile_err, 0.5);
  const double mu = harness::sample_quantile(uniform_err, 0.5);
  return {mq <= 1e-12 && mu >= 1e-4,
          "median final err_sq: quantile " + fmt(mq) + " (<= 1e-12), uniform " + fmt(mu) + " (>= 1e-4)"};
}

// 7. Sampled quantile with t = m, quantile_select vs sorting, exact vs bounding subset methods.
Outcome oracle_equivalence() {
  std::size_t stream_mismatch = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto system = corrupt(generate_gaussian_system(60, 4, seed),
                                {0.1, CorruptionModel::ConstantOffset, std::nullopt, seed});
    SolverConfig c;
    c.q = 0.7;
    c.max_iters = 500;
    c.seed = seed;
    c.strategy = Strategy::Quantile;
    const auto full = run_on_system(system, c);
    c.strategy = Strategy::SampledQuantile;
    c.t = 60;
    const auto sampled = run_on_system(system, c);
    stream_mismatch += !(full.records == sampled.records) || full.x_final != sampled.x_final;
  }

  Stream rng(2024);
  std::size_t select_mismatch = 0;
  for (int trial = 0; trial < 10'000; ++trial) {
    const std::size_t m = 1 + rng.uniform_index(200);
    std::vector<double> r(m);
    const bool ties = trial % 2 == 0;
    for (double& v : r) v = ties ? double(rng.uniform_index(8)) : std::abs(rng.normal());
    const double q = 0.01 + 0.99 * rng.uniform01();
    const std::size_t k = floor_count(q, m);
    if (k == 0) continue;
    const auto sel = quantile_select(r, q);
    const auto expected = oracle::smallest_k_by_sort(r, k);
    std::vector<double> sorted = r;
    std::sort(sorted.begin(), sorted.end());
    select_mismatch += sel.indices != expected || sel.threshold != sorted[k - 1];
  }

  std::size_t dominance_fail = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto system = generate_gaussian_system(14, 2, seed);
    const Matrix& a = system.a.matrix();
    const auto exact = spectral::sigma_subset_extremal(a, 10, spectral::Extremum::Min, spectral::SubsetMethod::exact());
    const auto sampled =
        spectral::sigma_subset_extremal(a, 10, spectral::Extremum::Min, spectral::SubsetMethod::sampled(200, seed));
    const auto greedy =
        spectral::sigma_subset_extremal(a, 10, spectral::Extremum::Min, spectral::SubsetMethod::greedy(200, seed));
    const double brute = oracle::subset_min_bruteforce(a, 10);
    dominance_fail += sampled.value < exact.value || greedy.value < exact.value ||
                      std::abs(exact.value - brute) > 1e-8 * std::max(1.0, brute);
  }
  return {stream_mismatch == 0 && select_mismatch == 0 && dominance_fail == 0,
          "t=m stream mismatches " + std::to_string(stream_mismatch) + "/20, quantile_select mismatches " +
              std::to_string(select_mismatch) + "/10000, dominance failures " + std::to_string(dominance_fail) +
              "/50 (C(14,10)=1001)"};
}

// 8. Every subcommand twice with identical inputs.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "qrk_acceptance_ac8";
  fs::remove_all(root);
  const std::string data = QRK_TEST_DATA_DIR;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"generate", "generate --m 40 --n 4 --seed 5 --out {d}/sys.txt"},
      {"corrupt", "corrupt --in {0}/sys.txt --beta 0.1 --model random-gaussian --seed 6 --out {d}/bad.txt"},
      {"solve-quantile", "solve --in {0}/bad.txt --strategy quantile --q 0.7 --seed 1 --max-iters 300 --out {d}/t.csv"},
      {"solve-sampled",
       "solve --in {0}/bad.txt --strategy sampled-quantile --q 0.7 --t 10 --seed 1 --max-iters 300 --out {d}/t.csv"},
      {"solve-uniform", "solve --in {0}/bad.txt --strategy uniform --seed 1 --max-iters 300 --out {d}/t.csv"},
      {"solve-motzkin", "solve --in {0}/bad.txt --strategy motzkin --max-iters 300 --out {d}/t.csv"},
      {"solve-powered", "solve --in {0}/bad.txt --strategy powered --p 2 --seed 1 --max-iters 300 --out {d}/t.csv"},
      {"spectral", "spectral --m 14 --n 2 --seed 3 --q 0.75 --beta 0.05 --beta-max"},
      {"spectral-sampled", "spectral --in {0}/bad.txt --q 0.7 --beta 0.1 --method sampled --budget 100 --seed 2"},
      {"heuristic", "heuristic --q 0.88"},
      {"heuristic-mass", "heuristic --mass 0.8744"},
      {"check-condition", "check-condition --q 0.75 --beta 0 --m 12 --n 2 --seed 4"},
      {"experiment", "experiment --config " + data + "/experiment_small.cfg --out {d}/exp"},
      {"compare", "compare --config " + data + "/compare_clean.cfg"},
      {"verify", "verify --config " + data + "/verify_small.cfg"},
  };
  const auto expand = [](std::string s, const fs::path& d, const fs::path& first) {
    for (auto [key, value] : {std::pair{std::string("{d}"), d.string()}, std::pair{std::string("{0}"), first.string()}}) {
      for (std::size_t p; (p = s.find(key)) != std::string::npos;) s.replace(p, key.size(), value);
    }
    return s;
  };
  std::vector<std::string> failed;
  for (const auto& [name, args] : commands) {
    std::vector<std::string> snapshots;
    for (int run = 0; run < 2; ++run) {
      const fs::path d = root / (name + "_" + std::to_string(run));
      fs::create_directories(d);
      const int rc = run_cli(expand(args, d, root / "generate_0"), d / "stdout.txt");
      if (name == "corrupt" && run == 0) fs::copy_file(d / "bad.txt", root / "generate_0" / "bad.txt");
      std::string snap = "rc=" + std::to_string(rc) + "\n";
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(d))
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), d));
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        std::string body = slurp(d / f);
        if (f.filename() == "summary.csv") body = drop_last_column(body);
        if (name == "experiment" && f.filename() == "stdout.txt") continue;  // names the output directory
        snap += "== " + f.string() + "\n" + body;
      }
      if (rc != 0) snap += "(nonzero exit)";
      snapshots.push_back(snap);
    }
    if (snapshots[0] != snapshots[1] || snapshots[0].find("(nonzero exit)") != std::string::npos) failed.push_back(name);
  }
  std::string detail = std::to_string(commands.size()) + " invocations over 9 subcommands, rerun byte-identical";
  if (!failed.empty()) {
    detail = "differing or failing:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"AC1", "corollary threshold at q = 0.88", 1.0, corollary},
      {"AC2", "heuristic ratio and alpha vs quadrature", 5.0, heuristic_internals},
      {"AC3", "one-step contraction on certified instances", 120.0, theorem_step},
      {"AC4", "lemma bounds at every iterate", 600.0, lemma_suite},
      {"AC5", "uniform Kaczmarz rate bound", 120.0, sv_rate},
      {"AC6", "robustness to 20% gross corruption", 600.0, robustness},
      {"AC7", "oracle equivalence", 120.0, oracle_equivalence},
      {"AC8", "CLI determinism", 120.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = outcome.pass && in_time;
    failures += !pass;
    std::cout << c.id << ' ' << (pass ? "PASS" : "FAIL") << "  " << c.title << ": " << outcome.detail << " ["
              << fmt(secs) << " s, limit " << fmt(c.limit_seconds) << " s" << (in_time ? "" : ", over time")
              << "]" << std::endl;
  }
  std::cout << (failures == 0 ? "acceptance: all criteria passed" : "acceptance: " + std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
