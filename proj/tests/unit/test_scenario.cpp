#include "laadmm/binio.hpp"
#include "laadmm/scenario.hpp"

#include "toy_cases.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <sstream>

using namespace laadmm;

namespace {

struct Toy {
  Network net = parse_matpower_case(toy::to_matpower(toy::triangle()), "triangle");
  PartitionedNetwork parts = build_partition_problems(net, parse_partition_map("1 0\n2 0\n3 1\n", net));
};

SampleConfig toy_config() {
  SampleConfig c;
  c.rho = 10.0;
  c.k = 3;
  c.primal_tol = 1e-7;
  return c;
}

}  // namespace

TEST(Scenario, ScalingFormula) {
  const Toy t;
  const Eigen::Vector3d xi(0.5, 0.25, 1.0);
  const LoadScenario s = make_scenario(t.net, 0.8, xi);
  EXPECT_DOUBLE_EQ(s.load[1], 0.8 * 1.25 * 1.5);
  EXPECT_EQ(s.load[0], 0.0);
  EXPECT_THROW(make_scenario(t.net, 1.0, Eigen::Vector2d(0, 0)), SampleError);
  // Capacity 4 pu: 0.9 * 4 / (1.25 * 1.5) caps at 1.
  EXPECT_DOUBLE_EQ(max_chi(t.net, xi), 1.0);
  toy::CaseSpec heavy = toy::triangle();
  heavy.buses[1].pd_mw = 300;
  const Network hn = parse_matpower_case(toy::to_matpower(heavy));
  EXPECT_DOUBLE_EQ(max_chi(hn, xi), 0.9 * 4.0 / (1.25 * 3.0));
}

TEST(Scenario, SamplesStayWithinBounds) {
  const Network net = load_matpower_case(LAADMM_DATA_DIR "/case14.m");
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const LoadScenario s = sample_load(net, rng);
    ASSERT_GE(s.xi.minCoeff(), 0.0);
    ASSERT_LT(s.xi.maxCoeff(), 1.0);
    ASSERT_GE(s.chi, 0.0);
    ASSERT_LE(s.chi, max_chi(net, s.xi));
    ASSERT_LE(s.load.sum(), kCapacityMargin * net.total_capacity() + 1e-12);
  }
  std::mt19937_64 a(3), b(3);
  EXPECT_EQ(sample_load(net, a).load, sample_load(net, b).load);
}

// splitmix64 reference values computed by hand from the published constants.
TEST(Scenario, DerivedSeedsAreStableAndDistinct) {
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  EXPECT_EQ(derive_seed(0, 0), mix(0x9E3779B97F4A7C15ULL));
  EXPECT_EQ(derive_seed(5, 2), mix(5 + 3 * 0x9E3779B97F4A7C15ULL));
  EXPECT_NE(derive_seed(1, 0), derive_seed(0, 1));
}

TEST(Scenario, SampleTargetRecoversCentralizedAngles) {
  const Toy t;
  const LoadScenario sc = make_scenario(t.net, 0.9, Eigen::Vector3d(0.1, 0.4, 0.7));
  const Sample s = generate_sample(t.net, t.parts, sc, toy_config());
  const ConsensusLayout& l = t.parts.layout;
  ASSERT_EQ(s.inputs.rows(), 3);
  ASSERT_EQ(s.inputs.cols(), l.feature_width());
  ASSERT_EQ(s.target.size(), l.feature_width());
  const DispatchSolution ref = solve_centralized(t.net, sc.load);
  EXPECT_DOUBLE_EQ(s.ref_objective, ref.objective);
  for (int sl = 0; sl < l.n_pub(); ++sl) EXPECT_NEAR(s.target[l.width() + sl], ref.angles[l.slots[sl].bus], 1e-4);
  EXPECT_GT(s.iterations, 3);

  SampleConfig bad = toy_config();
  bad.max_iter = 5;
  EXPECT_THROW(generate_sample(t.net, t.parts, sc, bad), SampleError);
  bad = toy_config();
  bad.k = 11;
  EXPECT_THROW(generate_sample(t.net, t.parts, sc, bad), SampleError);
  const PartitionedNetwork single = build_partition_problems(t.net, spectral_partition(t.net, 1, 0));
  EXPECT_THROW(generate_sample(t.net, single, sc, toy_config()), SampleError);
}

TEST(Scenario, DatasetIndependentOfWorkerCount) {
  const Toy t;
  DatasetConfig c;
  c.count = 12;
  c.seed = 4;
  c.sample = toy_config();
  c.workers = 1;
  int last_accepted = 0;
  const DatasetResult one = generate_dataset(t.net, t.parts, c, [&](const DatasetProgress& p) { last_accepted = p.accepted; });
  EXPECT_TRUE(one.complete);
  EXPECT_EQ(one.dataset.size(), 12);
  EXPECT_EQ(last_accepted, 12);
  c.workers = 4;
  const DatasetResult four = generate_dataset(t.net, t.parts, c);
  EXPECT_EQ(serialize_dataset(one.dataset), serialize_dataset(four.dataset));
  c.seed = 5;
  EXPECT_NE(serialize_dataset(one.dataset), serialize_dataset(generate_dataset(t.net, t.parts, c).dataset));
  EXPECT_EQ(one.dataset.fingerprint, t.parts.layout.fingerprint());
  EXPECT_EQ(one.dataset.features(), t.parts.layout.feature_width());
}

TEST(Scenario, RetryBudgetExhaustion) {
  const Toy t;
  DatasetConfig c;
  c.count = 3;
  c.sample = toy_config();
  c.sample.max_iter = 4;  // never converges
  c.retry_budget = 2;
  const DatasetResult r = generate_dataset(t.net, t.parts, c);
  EXPECT_FALSE(r.complete);
  EXPECT_EQ(r.dataset.size(), 0);
  EXPECT_EQ(r.excluded, 5);
  EXPECT_EQ(r.diagnostics.size(), 5u);
}

TEST(Scenario, DatasetFiles) {
  const Toy t;
  DatasetConfig c;
  c.count = 3;
  c.sample = toy_config();
  const Dataset ds = generate_dataset(t.net, t.parts, c).dataset;
  const std::string path = ::testing::TempDir() + "/dataset_test.bin";
  write_dataset(ds, path);
  const Dataset back = read_dataset(path, ds.fingerprint);
  EXPECT_EQ(serialize_dataset(back), serialize_dataset(ds));
  EXPECT_EQ(back.samples[2].target, ds.samples[2].target);
  EXPECT_THROW(read_dataset(path, ds.fingerprint + 1), std::exception);

  const std::string bytes = read_bytes(path);
  write_bytes(path, bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_dataset(path), FormatError);
  std::string wrong = bytes;
  wrong[0] = 'X';
  EXPECT_THROW(deserialize_dataset(wrong), FormatError);
  std::remove(path.c_str());

  std::ostringstream csv;
  write_dataset_csv(csv, ds);
  const std::string text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}
