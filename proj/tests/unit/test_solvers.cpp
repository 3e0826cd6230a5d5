#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "qrk/corruption.hpp"
#include "qrk/error.hpp"
#include "qrk/solvers.hpp"

using namespace qrk;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected qrk::Error");
  return ErrorKind::Usage;
}

std::vector<double> frequencies(std::size_t m, int draws, auto&& pick) {
  std::vector<double> f(m, 0.0);
  for (int k = 0; k < draws; ++k) f[pick()] += 1.0;
  for (double& v : f) v /= draws;
  return f;
}

}  // namespace

TEST_CASE("project_step") {
  CHECK(project_step(Vector{3, 4}, Vector{1, 0}, 0.0) == Vector{0, 4});
  const double r = 1.0 / std::sqrt(2.0);
  const auto y = project_step(Vector{1, 1}, Vector{r, r}, 0.0);
  CHECK(std::abs(y[0]) <= 1e-15);
  CHECK(std::abs(y[1]) <= 1e-15);
  CHECK(project_step(Vector{0, 4}, Vector{1, 0}, 0.0) == Vector{0, 4});

  SUBCASE("lands on the hyperplane, idempotent, non-expansive toward the truth") {
    const auto sys = generate_gaussian_system(40, 6, 21);
    Stream rng(1);
    for (int trial = 0; trial < 500; ++trial) {
      Vector x(6);
      for (double& v : x) v = 10.0 * rng.normal();
      const std::size_t i = rng.uniform_index(40);
      const auto a = sys.a.row(i);
      const auto once = project_step(x, a, sys.b_true[i]);
      CHECK(std::abs(dot(a, once) - sys.b_true[i]) <= 1e-10);
      const auto twice = project_step(once, a, sys.b_true[i]);
      CHECK(std::sqrt(squared_distance(once, twice)) <= 1e-10);
      CHECK(std::sqrt(squared_distance(once, sys.x_true)) <= std::sqrt(squared_distance(x, sys.x_true)) + 1e-12);
    }
  }
}

TEST_CASE("select_uniform") {
  Stream one(5);
  for (int k = 0; k < 100; ++k) CHECK(select_uniform(1, one) == 0);

  Stream rng(6);
  for (double f : frequencies(4, 40000, [&] { return select_uniform(4, rng); })) CHECK(std::abs(f - 0.25) <= 0.02);

  Stream a(42), b(42);
  for (int k = 0; k < 100; ++k) CHECK(select_uniform(17, a) == select_uniform(17, b));
}

TEST_CASE("select_quantile") {
  Stream rng(8);
  for (int k = 0; k < 200; ++k) CHECK(select_quantile(Vector{0, 5, 5, 5}, 0.25, rng) == 0);

  SUBCASE("all equal: uniform over the lowest-index rows") {
    const auto f = frequencies(6, 30000, [&] { return select_quantile(Vector(6, 1.0), 0.5, rng); });
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(f[i] - 1.0 / 3.0) <= 0.02);
    for (std::size_t i = 3; i < 6; ++i) CHECK(f[i] == 0.0);
  }
  SUBCASE("pick never exceeds the threshold") {
    for (int trial = 0; trial < 1000; ++trial) {
      Vector r(25);
      for (double& v : r) v = std::abs(rng.normal());
      const double q = 0.1 + 0.8 * rng.uniform01();
      const auto sel = quantile_select(r, q);
      CHECK(r[select_quantile(r, q, rng)] <= sel.threshold);
    }
  }
  CHECK(kind_of([&] { select_quantile(Vector{1, 2}, 0.3, rng); }) == ErrorKind::EmptyQuantile);
}

TEST_CASE("select_quantile_sampled") {
  SUBCASE("t = m reproduces select_quantile draw for draw") {
    Stream data(3);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t m = 5 + data.uniform_index(50);
      Vector r(m);
      for (double& v : r) v = std::floor(4.0 * data.uniform01());
      const double q = 0.2 + 0.7 * data.uniform01();
      Stream a(trial), b(trial);
      for (int k = 0; k < 20; ++k) {
        const auto full = select_quantile(r, q, a);
        const auto sampled = select_quantile_sampled([&](std::size_t i) { return r[i]; }, m, q, m, b);
        CHECK(full == sampled.index);
      }
      CHECK(a.counter() == b.counter());
    }
  }
  SUBCASE("t = 1 is uniform over all rows") {
    Stream rng(4);
    const Vector r{9, 1, 5, 3};
    const auto f = frequencies(4, 40000, [&] {
      return select_quantile_sampled([&](std::size_t i) { return r[i]; }, 4, 0.5, 1, rng).index;
    });
    for (double v : f) CHECK(std::abs(v - 0.25) <= 0.02);
  }
  SUBCASE("evaluates exactly t residuals") {
    Stream rng(5);
    std::size_t calls = 0;
    const auto residual = [&](std::size_t i) {
      ++calls;
      return static_cast<double>(i % 7);
    };
    select_quantile_sampled(residual, 1000, 0.5, 37, rng);
    CHECK(calls == 37);
  }
  SUBCASE("sampled median almost never reaches the top percentile") {
    // residual rank = index; 1e6 picks from 50-sample medians out of m = 1000
    Stream rng(6);
    const auto residual = [](std::size_t i) { return static_cast<double>(i); };
    std::size_t high = 0;
    for (int trial = 0; trial < 1'000'000; ++trial) {
      high += select_quantile_sampled(residual, 1000, 0.5, 50, rng).index >= 990;
    }
    CHECK(high == 0);
  }
  SUBCASE("bad sample size") {
    Stream rng(7);
    const auto residual = [](std::size_t) { return 0.0; };
    CHECK(kind_of([&] { select_quantile_sampled(residual, 10, 0.5, 0, rng); }) == ErrorKind::ParameterDomain);
    CHECK(kind_of([&] { select_quantile_sampled(residual, 10, 0.5, 11, rng); }) == ErrorKind::ParameterDomain);
  }
}

TEST_CASE("select_motzkin") {
  CHECK(select_motzkin(Vector{1, 3, 2}) == 1);
  CHECK(select_motzkin(Vector{5, 5}) == 0);
  Stream rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    Vector r(1 + rng.uniform_index(30));
    for (double& v : r) v = static_cast<double>(rng.uniform_index(5));
    std::size_t expected = 0;
    for (std::size_t i = 0; i < r.size(); ++i)
      if (r[i] > r[expected]) expected = i;
    CHECK(select_motzkin(r) == expected);
  }
}

TEST_CASE("select_powered") {
  Stream rng(10);
  for (double f : frequencies(5, 50000, [&] { return select_powered(Vector{1, 2, 3, 0.5, 9}, 0.0, rng); }))
    CHECK(std::abs(f - 0.2) <= 0.02);
  for (int k = 0; k < 200; ++k) CHECK(select_powered(Vector{1, 0, 0}, 2.0, rng) == 0);
  const auto f = frequencies(2, 100000, [&] { return select_powered(Vector{1, 2}, 2.0, rng); });
  CHECK(std::abs(f[1] - 0.8) <= 0.02);
  CHECK(kind_of([&] { select_powered(Vector{0, 0}, 2.0, rng); }) == ErrorKind::AllZeroResiduals);
  // huge exponents stay finite
  CHECK(select_powered(Vector{1e300, 2e300}, 50.0, rng) == 1);
}

TEST_CASE("run_solver") {
  SUBCASE("uniform on the identity converges") {
    const RowNormalizedMatrix eye(Matrix::identity(2));
    SolverConfig c;
    c.strategy = Strategy::Uniform;
    c.max_iters = 200;
    c.seed = 1;
    const Vector truth{1, 2};
    const auto trace = run_solver(eye, truth, c, std::span<const double>(truth));
    CHECK(trace.final_err_sq() <= 1e-20);
  }
  SUBCASE("quantile on the identity stalls once a row is satisfied") {
    // floor(0.5 * 2) = 1: the satisfied equation keeps the smallest residual.
    const RowNormalizedMatrix eye(Matrix::identity(2));
    SolverConfig c;
    c.strategy = Strategy::Quantile;
    c.q = 0.5;
    c.max_iters = 50;
    const Vector truth{1, 2};
    const auto trace = run_solver(eye, truth, c, std::span<const double>(truth));
    CHECK(trace.x_final == Vector{1, 0});
    CHECK(trace.status == TraceStatus::BudgetExhausted);
  }
  SUBCASE("every strategy converges on a consistent generic system") {
    const auto sys = generate_gaussian_system(60, 5, 31);
    for (auto strategy : {Strategy::Uniform, Strategy::Quantile, Strategy::SampledQuantile, Strategy::Motzkin,
                          Strategy::Powered}) {
      SolverConfig c;
      c.strategy = strategy;
      c.q = 0.7;
      c.t = 20;
      c.p = 2.0;
      c.max_iters = 5000;
      c.stop_tol = 1e-10;
      c.seed = 2;
      const auto trace = run_on_system(sys, c);
      CAPTURE(to_string(strategy));
      CHECK(trace.status == TraceStatus::Converged);
      CHECK(trace.final_err_sq() <= 1e-20);
      for (std::size_t k = 0; k < trace.records.size(); ++k) {
        CHECK(trace.records[k].iter == k + 1);
        CHECK(trace.records[k].picked_index < 60);
      }
    }
  }
  SUBCASE("determinism and blindness") {
    const auto sys = corrupt(generate_gaussian_system(50, 4, 3), {0.1, CorruptionModel::RandomGaussian, std::nullopt, 4});
    SolverConfig c;
    c.strategy = Strategy::Quantile;
    c.q = 0.6;
    c.max_iters = 300;
    c.seed = 77;
    const auto t1 = run_on_system(sys, c);
    const auto t2 = run_on_system(sys, c);
    CHECK(t1 == t2);

    auto relabeled = sys;
    relabeled.corrupt_set = {0, 1, 2};
    const auto blind1 = run_solver(sys.a, sys.b_observed, c, std::span<const double>(sys.x_true));
    const auto blind2 = run_solver(relabeled.a, relabeled.b_observed, c, std::span<const double>(relabeled.x_true));
    CHECK(blind1 == blind2);

    std::size_t flagged = 0;
    for (const auto& r : t1.records) {
      CHECK(r.picked_corrupted == std::binary_search(sys.corrupt_set.begin(), sys.corrupt_set.end(), r.picked_index));
      flagged += r.picked_corrupted;
    }
    CHECK(flagged < t1.records.size() / 10);
  }
  SUBCASE("no ground truth: err_sq is NaN and the budget is used") {
    const auto sys = generate_gaussian_system(20, 3, 2);
    SolverConfig c;
    c.strategy = Strategy::Motzkin;
    c.max_iters = 17;
    c.stop_tol = 1.0;
    const auto trace = run_solver(sys.a, sys.b_observed, c);
    CHECK(trace.records.size() == 17);
    CHECK(std::isnan(trace.records.back().err_sq));
  }
  SUBCASE("invalid configurations") {
    const auto sys = generate_gaussian_system(20, 3, 2);
    SolverConfig c;
    c.q = 1.0;
    CHECK(kind_of([&] { run_on_system(sys, c); }) == ErrorKind::ParameterDomain);
    c.q = 0.5;
    c.max_iters = 0;
    CHECK(kind_of([&] { run_on_system(sys, c); }) == ErrorKind::ParameterDomain);
    c.max_iters = 10;
    c.strategy = Strategy::SampledQuantile;
    c.t = 21;
    CHECK(kind_of([&] { run_on_system(sys, c); }) == ErrorKind::ParameterDomain);
  }
}

TEST_CASE("trace CSV") {
  const auto sys = generate_gaussian_system(10, 2, 1);
  SolverConfig c;
  c.strategy = Strategy::Quantile;
  c.q = 0.5;
  c.max_iters = 3;
  std::stringstream ss;
  write_trace_csv(ss, run_on_system(sys, c));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(ss, line)) lines.push_back(line);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "iter,err_sq,quantile_Q,picked_index,picked_corrupted,status");
  CHECK(lines[1].back() == ',');
  CHECK(lines[3].ends_with(",BudgetExhausted"));
  CHECK(lines[1].starts_with("1,"));
}

TEST_CASE("exact_step_expectation") {
  SUBCASE("identity, q = 1: each step zeroes one coordinate") {
    const std::size_t n = 5;
    Vector truth{1, -2, 3, 0.5, 4};
    CorruptedSystem sys{RowNormalizedMatrix(Matrix::identity(n)), truth, truth, truth, {}, 0.0};
    const Vector x{0, 0, 0, 0, 0};
    const auto e = exact_step_expectation(sys, x, 1.0);
    CHECK(e.expected_err_sq == doctest::Approx((1.0 - 1.0 / n) * e.err_sq).epsilon(1e-15));
    CHECK(e.corrupted.empty());
  }
  SUBCASE("no corrupted admissible rows: expectation does not grow") {
    const auto sys = generate_gaussian_system(30, 4, 8);
    Stream rng(1);
    for (int trial = 0; trial < 100; ++trial) {
      Vector x(4);
      for (double& v : x) v = rng.normal();
      const auto e = exact_step_expectation(sys, x, 0.6);
      CHECK(e.expected_err_sq <= e.err_sq + 1e-12);
    }
  }
  SUBCASE("agrees with Monte Carlo sampling of select_quantile") {
    const auto sys = corrupt(generate_gaussian_system(40, 3, 9), {0.2, CorruptionModel::ConstantOffset, 0.3, 2});
    Vector x{0.5, -0.5, 0.25};
    const double q = 0.7;
    const auto e = exact_step_expectation(sys, x, q);
    CHECK(e.admissible.size() == 28);
    CHECK(e.corrupted.size() + e.clean.size() == 28);
    double mean = 0.0;
    for (double v : e.err_sq_after) mean += v;
    CHECK(e.expected_err_sq == doctest::Approx(mean / 28.0).epsilon(1e-14));

    Stream rng(12);
    const auto r = residuals(sys.a, x, sys.b_observed);
    const int draws = 200000;
    double sum = 0.0, sum_sq = 0.0;
    for (int k = 0; k < draws; ++k) {
      const std::size_t i = select_quantile(r.values, q, rng);
      const double v = squared_distance(project_step(x, sys.a.row(i), sys.b_observed[i]), sys.x_true);
      sum += v;
      sum_sq += v * v;
    }
    const double mc = sum / draws;
    const double se = std::sqrt((sum_sq / draws - mc * mc) / draws);
    CHECK(std::abs(mc - e.expected_err_sq) <= 3.0 * se);
  }
}
