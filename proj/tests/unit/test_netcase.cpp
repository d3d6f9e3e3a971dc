#include "laadmm/netcase.hpp"

#include "toy_cases.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace laadmm;

namespace {

Network toy_network(const toy::CaseSpec& spec) { return parse_matpower_case(toy::to_matpower(spec), spec.name); }

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST(Netcase, ParsesTriangleInPerUnit) {
  const Network net = toy_network(toy::triangle());
  ASSERT_EQ(net.num_buses(), 3);
  ASSERT_EQ(net.num_branches(), 3);
  ASSERT_EQ(net.num_generators(), 2);
  EXPECT_EQ(net.reference_bus(), 0);
  EXPECT_DOUBLE_EQ(net.base_load()[1], 1.5);
  EXPECT_DOUBLE_EQ(net.total_capacity(), 4.0);
  EXPECT_DOUBLE_EQ(net.generators[0].cost, 10.0);
  EXPECT_DOUBLE_EQ(net.branches[0].susceptance, 10.0);
  EXPECT_FALSE(net.branches[0].flow_limit.has_value());
  EXPECT_EQ(net.bus_index(3), 2);
  EXPECT_EQ(net.bus_index(7), -1);
  EXPECT_EQ(net.num_components(), 1);
}

TEST(Netcase, ShippedCases) {
  const Network n14 = load_matpower_case(LAADMM_DATA_DIR "/case14.m");
  EXPECT_EQ(n14.num_buses(), 14);
  EXPECT_EQ(n14.num_branches(), 20);
  EXPECT_EQ(n14.num_generators(), 5);
  const Network n118 = load_matpower_case(LAADMM_DATA_DIR "/case118.m");
  EXPECT_EQ(n118.num_buses(), 118);
  EXPECT_EQ(n118.num_branches(), 186);
  EXPECT_EQ(n118.num_components(), 1);
}

TEST(Netcase, RejectsMalformedCases) {
  const std::string good = toy::to_matpower(toy::triangle());
  EXPECT_THROW(parse_matpower_case(replace(good, "mpc.gencost", "mpc.gcost")), ParseError);
  EXPECT_THROW(parse_matpower_case(replace(good, "\t1\t2\t0\t0.1", "\t1\t2\t0\t-0.1")), ParseError);
  EXPECT_THROW(parse_matpower_case(replace(good, "\t1\t2\t0\t0.1", "\t1\t9\t0\t0.1")), ParseError);
  EXPECT_THROW(parse_matpower_case(replace(good, "\t2\t3\t0\t0.1", "\t2\t2\t0\t0.1")), ParseError);
  EXPECT_THROW(parse_matpower_case(replace(good, "mpc.baseMVA = 100", "mpc.baseMVA = -1")), ParseError);
  EXPECT_THROW(parse_matpower_case(replace(good, "\t2\t0\t0\t2\t10", "\t1\t0\t0\t2\t10")), ParseError);
  EXPECT_THROW(load_matpower_case("/nonexistent/case.m"), ParseError);
}

TEST(Netcase, DropsOutOfServiceRows) {
  toy::CaseSpec spec = toy::triangle();
  spec.branches.push_back({1, 2, 0.3, 0});
  std::string text = toy::to_matpower(spec);
  // status column of the last branch row
  text = replace(text, "\t1\t2\t0\t0.29999999999999999\t0\t0\t0\t0\t0\t0\t1", "\t1\t2\t0\t0.3\t0\t0\t0\t0\t0\t0\t0");
  EXPECT_EQ(parse_matpower_case(text).num_branches(), 3);
}

TEST(Netcase, FormatRoundTrip) {
  for (const auto& spec : toy::acceptance_cases()) {
    const Network a = toy_network(spec);
    const Network b = parse_matpower_case(format_matpower_case(a));
    ASSERT_EQ(a.num_buses(), b.num_buses());
    ASSERT_EQ(a.num_branches(), b.num_branches());
    ASSERT_EQ(a.num_generators(), b.num_generators());
    EXPECT_LT((a.base_load() - b.base_load()).cwiseAbs().maxCoeff(), 1e-12);
    for (int i = 0; i < a.num_branches(); ++i) {
      EXPECT_NEAR(a.branches[i].susceptance, b.branches[i].susceptance, 1e-9);
      EXPECT_EQ(a.branches[i].flow_limit.has_value(), b.branches[i].flow_limit.has_value());
    }
  }
}

TEST(Netcase, SummaryListsKeyFields) {
  const std::string s = summarize(toy_network(toy::triangle()));
  EXPECT_NE(s.find("buses"), std::string::npos);
  EXPECT_NE(s.find("generators"), std::string::npos);
  EXPECT_NE(s.find("total_load_pu"), std::string::npos);
}

// The Laplacian assembled from per-branch 2x2 stamps.
TEST(Netcase, SystemMatricesMatchBranchStamps) {
  const Network net = load_matpower_case(LAADMM_DATA_DIR "/case14.m");
  const SystemMatrices sm = build_system_matrices(net);
  Eigen::MatrixXd stamp = Eigen::MatrixXd::Zero(14, 14);
  for (const Branch& br : net.branches) {
    stamp(br.from_bus, br.from_bus) += br.susceptance;
    stamp(br.to_bus, br.to_bus) += br.susceptance;
    stamp(br.from_bus, br.to_bus) -= br.susceptance;
    stamp(br.to_bus, br.from_bus) -= br.susceptance;
  }
  EXPECT_LT((sm.laplacian - stamp).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((sm.laplacian * Eigen::VectorXd::Ones(14)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(sm.incidence(0, net.branches[0].from_bus), 1.0);
  EXPECT_EQ(sm.incidence(0, net.branches[0].to_bus), -1.0);
  EXPECT_LT((sm.flow_map - sm.susceptance_diag.asDiagonal() * sm.incidence).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Netcase, CentralizedTriangle) {
  const Network net = toy_network(toy::triangle());
  const DispatchSolution s = solve_centralized(net, net.base_load());
  ASSERT_EQ(s.status, DispatchStatus::optimal);
  EXPECT_NEAR(s.objective, 15.0, 1e-9);
  EXPECT_NEAR(s.generation[0], 1.5, 1e-9);
  EXPECT_NEAR(s.generation[1], 0.0, 1e-9);
  EXPECT_NEAR(s.angles[0], 0.0, 1e-12);
  // Uncongested: every bus prices at the cheap unit's cost.
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.balance_duals[i], 10.0, 1e-6);
  // Literal balance H theta + g - d = 0.
  const SystemMatrices sm = build_system_matrices(net);
  Eigen::VectorXd inj = Eigen::VectorXd::Zero(3);
  inj[0] = s.generation[0];
  inj[2] = s.generation[1];
  EXPECT_LT((sm.laplacian * s.angles + inj - net.base_load()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Netcase, CentralizedMatchesVertexEnumeration) {
  for (const auto& spec : toy::acceptance_cases()) {
    const Network net = toy_network(spec);
    const auto oracle = toy::vertex_enumeration_objective(spec);
    ASSERT_TRUE(oracle.has_value()) << spec.name;
    const DispatchSolution s = solve_centralized(net, net.base_load());
    ASSERT_EQ(s.status, DispatchStatus::optimal) << spec.name;
    EXPECT_NEAR(s.objective, *oracle, 1e-8 * std::abs(*oracle)) << spec.name;
  }
}

TEST(Netcase, CongestedTwoBusDispatch) {
  const auto cases = toy::acceptance_cases();
  const Network net = toy_network(cases[2]);
  const DispatchSolution s = solve_centralized(net, net.base_load());
  ASSERT_EQ(s.status, DispatchStatus::optimal);
  EXPECT_NEAR(s.objective, 16.0, 1e-8);
  EXPECT_NEAR(s.balance_duals[0], 5.0, 1e-6);
  EXPECT_NEAR(s.balance_duals[1], 30.0, 1e-6);
}

TEST(Netcase, ScaledLoadsAgreeWithOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.2, 1.2);
  for (auto spec : toy::acceptance_cases()) {
    const double scale = u(rng);
    for (auto& b : spec.buses) b.pd_mw *= scale;
    const auto oracle = toy::vertex_enumeration_objective(spec);
    const Network net = toy_network(spec);
    const DispatchSolution s = solve_centralized(net, net.base_load());
    if (!oracle) {
      EXPECT_EQ(s.status, DispatchStatus::infeasible) << spec.name;
      continue;
    }
    ASSERT_EQ(s.status, DispatchStatus::optimal) << spec.name;
    EXPECT_NEAR(s.objective, *oracle, 1e-8 * std::max(1.0, std::abs(*oracle))) << spec.name;
  }
}

TEST(Netcase, OverloadIsInfeasible) {
  toy::CaseSpec spec = toy::triangle();
  spec.buses[1].pd_mw = 500;
  EXPECT_FALSE(toy::vertex_enumeration_objective(spec).has_value());
  const Network net = toy_network(spec);
  EXPECT_EQ(solve_centralized(net, net.base_load()).status, DispatchStatus::infeasible);
  EXPECT_THROW(solve_centralized(net, Eigen::VectorXd::Zero(2)), std::exception);
}
