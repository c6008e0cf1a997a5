#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "avmtbf/errors.hpp"
#include "avmtbf/model.hpp"
#include "avmtbf/units.hpp"

using namespace avmtbf;
using namespace avmtbf::model;

namespace {

const std::vector<double> kTableP_i{0.234, 0.640, 0.126};
const std::vector<double> kTableP_s{0.308, 0.176, 0.115};

Leaf leaf(double rate, double p_s) {
  Leaf l;
  l.error_rate_per_hour = rate;
  l.situation_probability = p_s;
  return l;
}

FailureModelTree single_profile_tree(const std::vector<double>& p_i,
                                     const std::vector<double>& type2_rates,
                                     const std::vector<double>& type2_ps) {
  MissionProfile profile;
  profile.name = "highway";
  profile.probability = 1.0;
  std::vector<double> boundaries{80.0};
  for (std::size_t i = 0; i < p_i.size(); ++i) boundaries.push_back(100.0 + 10.0 * i);
  profile.partition = SpeedRangePartition::from_kmh(boundaries);
  profile.range_probabilities = p_i;
  for (std::size_t i = 0; i < p_i.size(); ++i) {
    profile.leaves[0].push_back(leaf(0.0, 0.0));
    profile.leaves[1].push_back(leaf(type2_rates[i], type2_ps[i]));
  }
  FailureModelTree tree;
  tree.profiles.push_back(std::move(profile));
  return tree;
}

FailureModelTree reference_tree(double rate = 12.14) {
  return single_profile_tree(kTableP_i, {rate, rate, rate}, kTableP_s);
}

std::mt19937 rng(97);

FailureModelTree random_tree(bool with_refinement) {
  std::uniform_int_distribution<int> n_ranges(1, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> rate(0.0, 50.0);
  const int n = n_ranges(rng);
  std::vector<double> p_i(n), rates(n), ps(n);
  double rest = 1.0;
  for (int i = 0; i < n; ++i) {
    p_i[i] = (i + 1 == n) ? rest : u(rng) * rest;
    rest -= p_i[i];
    rates[i] = rate(rng);
    ps[i] = u(rng);
  }
  auto tree = single_profile_tree(p_i, rates, ps);
  if (with_refinement) {
    for (auto& l : tree.profiles[0].leaves[1]) {
      if (u(rng) < 0.5) continue;
      std::uniform_int_distribution<int> n_children(1, 3);
      const int k = n_children(rng);
      double q_rest = 1.0;
      std::vector<RefinementNode> children;
      double effective = 0.0;
      for (int j = 0; j < k; ++j) {
        RefinementNode node;
        node.label = "sub" + std::to_string(j);
        node.conditional_probability = (j + 1 == k) ? q_rest * u(rng) : u(rng) * q_rest;
        q_rest -= node.conditional_probability;
        node.situation_probability = u(rng);
        effective += node.conditional_probability * (*node.situation_probability);
        children.push_back(std::move(node));
      }
      l.situation_probability.reset();
      l.children = std::move(children);
      (void)effective;
    }
  }
  return tree;
}

}  // namespace

TEST_CASE("simple failure rate") {
  using Pair = std::pair<double, double>;
  SUBCASE("single product") {
    const Pair terms[] = {{0.0, 0.0}, {10.0, 0.2}};
    CHECK(failure_rate_simple(terms) == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("all zero means no failures") {
    const Pair terms[] = {{0.0, 0.3}, {0.0, 0.2}};
    CHECK(failure_rate_simple(terms) == 0.0);
  }
  SUBCASE("hand sum") {
    const Pair terms[] = {{1.0, 0.5}, {2.0, 0.25}};
    CHECK(failure_rate_simple(terms) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("extended failure rate") {
  SUBCASE("reference tree lands in the published MTBF band") {
    auto result = failure_rate_extended(reference_tree());
    const double mtbf_seconds = units::hours_to_seconds(result.mtbf_hours);
    CHECK(mtbf_seconds > 1447.0);
    CHECK(mtbf_seconds < 1599.0);
    CHECK(result.lambda_per_hour == doctest::Approx(12.14 * 0.199202).epsilon(1e-9));
  }
  SUBCASE("degenerate tree equals the simple model bit for bit") {
    auto tree = single_profile_tree({1.0}, {7.5}, {0.31});
    tree.profiles[0].leaves[0][0] = leaf(2.5, 0.11);
    auto result = failure_rate_extended(tree);
    const std::pair<double, double> terms[] = {{2.5, 0.11}, {7.5, 0.31}};
    CHECK(result.lambda_per_hour == failure_rate_simple(terms));
  }
  SUBCASE("two identical profiles at half weight equal one") {
    auto tree = reference_tree();
    auto twin = tree;
    twin.profiles.push_back(twin.profiles[0]);
    twin.profiles[0].probability = 0.5;
    twin.profiles[1].probability = 0.5;
    CHECK(failure_rate_extended(twin).lambda_per_hour ==
          doctest::Approx(failure_rate_extended(tree).lambda_per_hour).epsilon(1e-14));
  }
  SUBCASE("zero rates give infinite mtbf") {
    auto tree = single_profile_tree({1.0}, {0.0}, {0.5});
    auto result = failure_rate_extended(tree);
    CHECK(result.lambda_per_hour == 0.0);
    CHECK(std::isinf(result.mtbf_hours));
    CHECK(result_to_json(result).at("mtbf_hours") == "inf");
  }
  SUBCASE("branches decompose the total") {
    for (int i = 0; i < 100; ++i) {
      auto tree = random_tree(true);
      auto result = failure_rate_extended(tree);
      double sum = 0.0;
      for (const auto& b : result.branches) sum += b.rate_per_hour;
      CHECK(sum == doctest::Approx(result.lambda_per_hour).epsilon(1e-12));
      if (result.lambda_per_hour > 0.0) {
        double shares = 0.0;
        for (const auto& b : result.branches) shares += b.share;
        CHECK(shares == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
  SUBCASE("rates scale linearly") {
    auto tree = random_tree(true);
    const double base = failure_rate_extended(tree).lambda_per_hour;
    for (auto& profile : tree.profiles) {
      for (auto& side : profile.leaves) {
        for (auto& l : side) l.error_rate_per_hour *= 3.0;
      }
    }
    CHECK(failure_rate_extended(tree).lambda_per_hour == doctest::Approx(3.0 * base).epsilon(1e-12));
  }
  SUBCASE("hardware/software split sums before multiplication") {
    auto tree = single_profile_tree({1.0}, {10.0}, {0.25});
    auto split = tree;
    split.profiles[0].leaves[1][0].rate_components = {{"hardware", 4.0}, {"software", 6.0}};
    CHECK(failure_rate_extended(split).lambda_per_hour ==
          failure_rate_extended(tree).lambda_per_hour);
  }
  SUBCASE("partition mismatch is rejected") {
    auto tree = reference_tree();
    tree.profiles[0].leaves[1].pop_back();
    CHECK_THROWS_AS(failure_rate_extended(tree), ValidationError);
  }
}

TEST_CASE("refinement semantics") {
  SUBCASE("conservation: children reproducing p_s leave lambda unchanged") {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<RefinementNode> children;
      double p_s = 0.0;
      const int k = 1 + trial % 3;
      double q_rest = 1.0;
      for (int j = 0; j < k; ++j) {
        RefinementNode node;
        node.label = "lead-speed-" + std::to_string(j);
        node.conditional_probability = u(rng) * q_rest;
        q_rest -= node.conditional_probability;
        node.situation_probability = u(rng);
        p_s += node.conditional_probability * (*node.situation_probability);
        children.push_back(std::move(node));
      }
      auto flat = single_profile_tree({1.0}, {9.0}, {p_s});
      auto refined = flat;
      refined.profiles[0].leaves[1][0].situation_probability.reset();
      refined.profiles[0].leaves[1][0].children = children;
      const double a = failure_rate_extended(flat).lambda_per_hour;
      const double b = failure_rate_extended(refined).lambda_per_hour;
      CHECK(b == doctest::Approx(a).epsilon(1e-9));
    }
  }
  SUBCASE("rate multipliers scale the branch rate") {
    auto tree = single_profile_tree({1.0}, {10.0}, {0.0});
    auto& l = tree.profiles[0].leaves[1][0];
    l.situation_probability.reset();
    RefinementNode augmented;
    augmented.label = "augmented";
    augmented.conditional_probability = 0.5;
    augmented.rate_multiplier = 2.0;
    augmented.situation_probability = 0.3;
    RefinementNode plain;
    plain.label = "plain";
    plain.conditional_probability = 0.5;
    plain.situation_probability = 0.1;
    l.children = {augmented, plain};
    // 10 * (0.5*2*0.3 + 0.5*1*0.1) = 10 * 0.35
    CHECK(failure_rate_extended(tree).lambda_per_hour == doctest::Approx(3.5).epsilon(1e-12));
  }
  SUBCASE("nested refinement multiplies down the path") {
    auto tree = single_profile_tree({1.0}, {8.0}, {0.0});
    auto& l = tree.profiles[0].leaves[1][0];
    l.situation_probability.reset();
    RefinementNode inner;
    inner.label = "standing";
    inner.conditional_probability = 0.25;
    inner.situation_probability = 0.4;
    RefinementNode outer;
    outer.label = "slow";
    outer.conditional_probability = 0.5;
    outer.children = {inner};
    l.children = {outer};
    CHECK(failure_rate_extended(tree).lambda_per_hour ==
          doctest::Approx(8.0 * 0.5 * 0.25 * 0.4).epsilon(1e-12));
    auto result = failure_rate_extended(tree);
    REQUIRE(!result.branches.empty());
    bool found = false;
    for (const auto& b : result.branches) {
      if (b.path.find("slow/standing") != std::string::npos) found = true;
    }
    CHECK(found);
  }
  SUBCASE("sibling probabilities above one are rejected") {
    auto tree = single_profile_tree({1.0}, {8.0}, {0.0});
    auto& l = tree.profiles[0].leaves[1][0];
    l.situation_probability.reset();
    RefinementNode a;
    a.label = "a";
    a.conditional_probability = 0.7;
    a.situation_probability = 0.2;
    RefinementNode b = a;
    b.label = "b";
    l.children = {a, b};
    CHECK_THROWS_AS(failure_rate_extended(tree), ValidationError);
  }
}

TEST_CASE("kappa") {
  SUBCASE("published tables") {
    const double k = kappa(kTableP_i, kTableP_s);
    CHECK(std::abs(k - 0.1992) < 0.0005);
    CHECK(k == doctest::Approx(0.199202).epsilon(1e-12));
  }
  SUBCASE("uniform situation probability collapses to itself") {
    CHECK(kappa(kTableP_i, std::vector<double>{0.3, 0.3, 0.3}) ==
          doctest::Approx(0.3).epsilon(1e-12));
  }
  SUBCASE("zero situation probabilities") {
    CHECK(kappa(kTableP_i, std::vector<double>{0.0, 0.0, 0.0}) == 0.0);
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(kappa(kTableP_i, std::vector<double>{0.1}), ValidationError);
  }
}

TEST_CASE("required error rate") {
  const double k = kappa(kTableP_i, kTableP_s);
  SUBCASE("published requirement rows") {
    CHECK(std::abs(required_error_rate(1e4, k) - 5.0e-4) < 0.01 * 5.0e-4);
    CHECK(std::abs(required_error_rate(1e5, k) - 5.0e-5) < 0.01 * 5.0e-5);
    CHECK(std::abs(required_error_rate(1e6, k) - 5.0e-6) < 0.01 * 5.0e-6);
    CHECK(std::abs(required_error_rate(1e7, k) - 5.0e-7) < 0.01 * 5.0e-7);
  }
  SUBCASE("no masking means the rate equals the target inverse") {
    CHECK(required_error_rate(2000.0, 1.0) == doctest::Approx(5e-4).epsilon(1e-12));
  }
  SUBCASE("identity: rate * target * kappa = 1") {
    const double rate = required_error_rate(12345.0, k);
    CHECK(rate * 12345.0 * k == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("zero kappa is unsatisfiable") {
    CHECK_THROWS_AS(required_error_rate(1e5, 0.0), UnsatisfiableError);
  }
  SUBCASE("invalid targets") {
    CHECK_THROWS_AS(required_error_rate(0.0, 0.2), ValidationError);
    CHECK_THROWS_AS(required_error_rate(1e5, 1.5), ValidationError);
  }
}

TEST_CASE("human baseline") {
  SUBCASE("published accident statistics") {
    const double mtbf = human_baseline_mtbf_hours(19980.0, 252.8e9, 100.0);
    CHECK(mtbf == doctest::Approx(126526.5265).epsilon(1e-8));
    // two significant figures: 1.3e5
    CHECK(std::round(mtbf / 1e4) * 1e4 == 130000.0);
  }
  SUBCASE("unit case") {
    CHECK(human_baseline_mtbf_hours(1.0, 100.0, 100.0) == doctest::Approx(1.0));
  }
  SUBCASE("doubling the speed halves the baseline") {
    const double a = human_baseline_mtbf_hours(100.0, 1e9, 100.0);
    const double b = human_baseline_mtbf_hours(100.0, 1e9, 200.0);
    CHECK(b == doctest::Approx(a / 2.0).epsilon(1e-12));
  }
  SUBCASE("zero accidents is an unbounded baseline") {
    CHECK(std::isinf(human_baseline_mtbf_hours(0.0, 1e9, 100.0)));
  }
  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(human_baseline_mtbf_hours(10.0, 0.0, 100.0), ValidationError);
    CHECK_THROWS_AS(human_baseline_mtbf_hours(10.0, 1e9, 0.0), ValidationError);
  }
}

TEST_CASE("model identities") {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SUBCASE("kappa factorization equals tree evaluation for constant rates") {
    for (int trial = 0; trial < 100; ++trial) {
      const double rate = 50.0 * u(rng);
      std::vector<double> p_i{0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng)};
      std::vector<double> ps{u(rng), u(rng), u(rng)};
      auto tree = single_profile_tree(p_i, {rate, rate, rate}, ps);
      const double lambda = failure_rate_extended(tree).lambda_per_hour;
      const double factored = rate * kappa(p_i, ps);
      CHECK(lambda == doctest::Approx(factored).epsilon(1e-9));
    }
  }
  SUBCASE("inverse round-trip recovers the target MTBF") {
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> p_i{0.25, 0.55, 0.20};
      std::vector<double> ps{0.05 + 0.9 * u(rng), 0.05 + 0.9 * u(rng), 0.05 + 0.9 * u(rng)};
      const double target = 10.0 + 1e6 * u(rng);
      const double budget = required_error_rate(target, kappa(p_i, ps));
      auto tree = single_profile_tree(p_i, {budget, budget, budget}, ps);
      const double mtbf = failure_rate_extended(tree).mtbf_hours;
      CHECK(mtbf == doctest::Approx(target).epsilon(1e-9));
    }
  }
}

TEST_CASE("tree serialization") {
  SUBCASE("round-trip preserves structure and evaluation") {
    auto tree = random_tree(true);
    auto doc = serialize_tree(tree);
    auto back = deserialize_tree(doc);
    CHECK(serialize_tree(back) == doc);
    CHECK(failure_rate_extended(back).lambda_per_hour ==
          failure_rate_extended(tree).lambda_per_hour);
  }
  SUBCASE("profile probabilities must sum to one") {
    auto tree = reference_tree();
    auto doc = serialize_tree(tree);
    doc["profiles"][0]["probability"] = 0.5;
    CHECK_THROWS_WITH_AS(deserialize_tree(doc), doctest::Contains("highway"), ValidationError);
  }
  SUBCASE("unknown schema version") {
    auto doc = serialize_tree(reference_tree());
    doc["schema"] = "avmtbf-tree/9";
    CHECK_THROWS_WITH_AS(deserialize_tree(doc), doctest::Contains("schema"), ValidationError);
  }
  SUBCASE("rate component split round-trips") {
    auto tree = single_profile_tree({1.0}, {10.0}, {0.25});
    tree.profiles[0].leaves[1][0].rate_components = {{"hardware", 4.0}, {"software", 6.0}};
    auto back = deserialize_tree(serialize_tree(tree));
    CHECK(back.profiles[0].leaves[1][0].error_rate_per_hour == doctest::Approx(10.0));
    CHECK(back.profiles[0].leaves[1][0].rate_components.at("hardware") == 4.0);
  }
}

TEST_CASE("tree from extracted tables") {
  situations::SituationTable st;
  st.partition = SpeedRangePartition::from_kmh({80.0, 100.0, 130.0, 180.0});
  st.p_i = kTableP_i;
  st.p_s = kTableP_s;
  st.p_d = {0.028, 0.021, 0.023};
  st.p_a_close = {0.001, 0.003, 0.004};
  st.p_c_close = {0.279, 0.152, 0.088};
  st.p_follower_close = {0.1, 0.05, 0.02};
  st.counts.resize(3);

  perception::ErrorRateTable rates;
  rates.partition = st.partition;
  for (int t = 0; t < 2; ++t) rates.cells[t].assign(3, {});
  for (auto& cell : rates.cells[1]) cell.rate_per_hour = 12.14;

  auto tree = tree_from_tables("highway", st, rates);
  auto result = failure_rate_extended(tree);
  CHECK(result.lambda_per_hour == doctest::Approx(12.14 * 0.199202).epsilon(1e-9));

  SUBCASE("type I leaves use the follower probabilities") {
    for (auto& cell : rates.cells[0]) cell.rate_per_hour = 2.0;
    auto with_type1 = tree_from_tables("highway", st, rates);
    const double expected_extra =
        2.0 * (0.234 * 0.1 + 0.640 * 0.05 + 0.126 * 0.02);
    CHECK(failure_rate_extended(with_type1).lambda_per_hour ==
          doctest::Approx(result.lambda_per_hour + expected_extra).epsilon(1e-9));
  }
  SUBCASE("partition mismatch is rejected") {
    perception::ErrorRateTable other = rates;
    other.partition = SpeedRangePartition::from_kmh({0.0, 200.0});
    for (int t = 0; t < 2; ++t) other.cells[t].assign(1, {});
    CHECK_THROWS_AS(tree_from_tables("x", st, other), ValidationError);
  }
}

TEST_CASE("text rendering") {
  auto tree = reference_tree();
  auto result = failure_rate_extended(tree);
  const std::string text = render_tree_text(tree, result);
  CHECK(text.find("profile highway") != std::string::npos);
  CHECK(text.find("100-130") != std::string::npos);
  CHECK(text.find("type2") != std::string::npos);
  CHECK(text.find("MTBF") != std::string::npos);
}
