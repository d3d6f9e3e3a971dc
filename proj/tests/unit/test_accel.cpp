#include "laadmm/accel.hpp"

#include "toy_cases.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace laadmm;

namespace {

struct Fourteen {
  Network net = load_matpower_case(LAADMM_DATA_DIR "/case14.m");
  PartitionedNetwork parts = build_partition_problems(net, load_partition_map(LAADMM_DATA_DIR "/ieee14_2part.map", net));
};

AdmmConfig horizon(int iters) {
  AdmmConfig c;
  c.rho = 1.0;
  c.max_iter = iters;
  c.primal_tol = 0.0;
  return c;
}

}  // namespace

TEST(Accel, ConvergedInjectionIsAFixedPoint) {
  const Fourteen f;
  AdmmConfig conv = horizon(40000);
  conv.primal_tol = 1e-7;
  conv.dual_tol = 1e-7;
  AdmmEngine engine(f.parts, conv);
  const AdmmRun ref = engine.run();
  ASSERT_TRUE(ref.result.converged);
  const Eigen::VectorXd star = state_features(ref.result.state);
  engine.set_config(horizon(30));
  const LaAdmmRun r = run_with_injection(engine, 4, [&](const Eigen::MatrixXd& w) {
    EXPECT_EQ(w.rows(), 4);
    return star;
  });
  EXPECT_TRUE(r.injection.fired);
  EXPECT_EQ(r.injection.iteration, 4);
  EXPECT_LT(r.injection.residual_after, 1e-6);
  EXPECT_GT(r.injection.residual_before, 1e-3);
  EXPECT_NEAR(r.run.result.final_cost, ref.result.final_cost, 1e-5 * ref.result.final_cost);
}

TEST(Accel, PrefixIsUntouchedAndInjectionFiresOnce) {
  const Fourteen f;
  AdmmEngine engine(f.parts, horizon(12));
  const AdmmRun base = engine.run();
  int calls = 0;
  const LaAdmmRun r = run_with_injection(engine, 4, [&](const Eigen::MatrixXd&) {
    ++calls;
    return Eigen::VectorXd::Zero(f.parts.layout.feature_width()).eval();
  });
  EXPECT_EQ(calls, 1);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(r.run.trajectory.features[i], base.trajectory.features[i]);
  EXPECT_NE(r.run.trajectory.features[5], base.trajectory.features[5]);
  EXPECT_EQ(r.injection.residual_before, base.trajectory.primal_residual[3]);
}

TEST(Accel, InjectionErrors) {
  const Fourteen f;
  AdmmEngine engine(f.parts, horizon(3));
  auto zero = [&](const Eigen::MatrixXd&) { return Eigen::VectorXd::Zero(f.parts.layout.feature_width()).eval(); };
  EXPECT_THROW(run_with_injection(engine, 4, zero), AdmmError);
  engine.set_config(horizon(10));
  EXPECT_THROW(run_with_injection(engine, 4, [](const Eigen::MatrixXd&) { return Eigen::VectorXd::Zero(3).eval(); }), AdmmError);
  InjectionRecord rec;
  EXPECT_THROW(injection_hook(0, engine.layout(), zero, rec), AdmmError);
  AdmmConfig no_record = horizon(10);
  no_record.record_trajectory = false;
  engine.set_config(no_record);
  EXPECT_THROW(run_with_injection(engine, 4, zero), AdmmError);

  GruModel model;
  model.fingerprint = engine.layout().fingerprint() + 1;
  engine.set_config(horizon(10));
  EXPECT_THROW(la_admm_solve(engine, model), ModelError);
}

TEST(Accel, HistogramClampsAtBothEnds) {
  const auto edges = default_bin_edges();
  ASSERT_EQ(edges.size(), 9u);
  EXPECT_EQ(edges.front(), -8.0);
  EXPECT_EQ(edges.back(), 0.0);
  const std::vector<double> v{-12.0, -8.0, -7.5, -3.0, -2.999, -0.1, 0.0, 2.0, -INFINITY};
  const std::vector<int> h = histogram_log10(v, edges);
  // Bin b covers [edges[b], edges[b+1]).
  std::vector<int> want(8, 0);
  for (double x : v) {
    int b = static_cast<int>(std::floor(x)) + 8;
    want[std::clamp(b, 0, 7)]++;
  }
  EXPECT_EQ(h, want);
  EXPECT_THROW(histogram_log10({NAN}, edges), std::invalid_argument);
  EXPECT_THROW(histogram_log10({1.0}, {0.0, 0.0}), std::invalid_argument);
}

TEST(Accel, SignTest) {
  EXPECT_DOUBLE_EQ(sign_test_p_value(10, 10), 1.0 / 1024.0);
  EXPECT_NEAR(sign_test_p_value(9, 10), 11.0 / 1024.0, 1e-15);
  EXPECT_DOUBLE_EQ(sign_test_p_value(0, 10), 1.0);
  EXPECT_DOUBLE_EQ(sign_test_p_value(0, 0), 1.0);
  EXPECT_NEAR(sign_test_p_value(100, 100), std::pow(2.0, -100), 1e-40);
  EXPECT_THROW(sign_test_p_value(3, 2), std::invalid_argument);
  EXPECT_DOUBLE_EQ(relative_cost_error(11.0, 10.0), 0.1);
}

// A model whose prediction is the converged state of the base case.
TEST(Accel, EvaluateWithFixedModel) {
  const Fourteen f;
  const int w = f.parts.layout.feature_width();
  GruModel m;
  m.params = ModelParams::zeros(w, 2, 2, w);
  m.normalizer.input_mean = Eigen::VectorXd::Zero(w);
  m.normalizer.input_std = Eigen::VectorXd::Ones(w);
  m.normalizer.target_mean = Eigen::VectorXd::Zero(w);
  m.normalizer.target_std = Eigen::VectorXd::Ones(w);
  m.k = 4;
  m.fingerprint = f.parts.layout.fingerprint();
  m.dual_width = f.parts.layout.width();
  m.consensus_width = f.parts.layout.n_pub();

  EvalConfig cfg;
  cfg.n_tests = 3;
  cfg.iterations = 20;
  cfg.seed = 1;
  const EvalSummary s = evaluate(f.net, f.parts, m, cfg);
  ASSERT_EQ(s.records.size(), 3u);
  EXPECT_EQ(s.failures, 0);
  for (const auto& r : s.records) {
    EXPECT_EQ(r.baseline_error.size(), 20u);
    EXPECT_EQ(r.accelerated_error.size(), 20u);
    EXPECT_TRUE(r.injection.fired);
    EXPECT_EQ(r.injection.duals, Eigen::VectorXd::Zero(f.parts.layout.width()));
  }
  EXPECT_EQ(std::accumulate(s.baseline_hist.begin(), s.baseline_hist.end(), 0), 3);
  EXPECT_EQ(s.baseline_residual.mean.size(), 20u);
  EXPECT_EQ(s.wins + s.ties <= 3, true);
  cfg.workers = 2;
  const EvalSummary s2 = evaluate(f.net, f.parts, m, cfg);
  EXPECT_EQ(s2.baseline_log10, s.baseline_log10);
  EXPECT_EQ(s2.accelerated_log10, s.accelerated_log10);

  std::ostringstream samples, summary;
  write_eval_samples_csv(samples, s);
  write_eval_summary_csv(summary, s);
  EXPECT_EQ(samples.str().rfind("sample,iter,method,cost,rel_err,primal_residual\n", 0), 0u);
  const std::string text = samples.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 3 * 2 * 20);
  EXPECT_FALSE(summary.str().empty());

  cfg.n_tests = 0;
  const EvalSummary empty = evaluate(f.net, f.parts, m, cfg);
  EXPECT_TRUE(empty.records.empty());
  cfg.n_tests = 1;
  cfg.iterations = 4;
  EXPECT_THROW(evaluate(f.net, f.parts, m, cfg), AdmmError);
}
