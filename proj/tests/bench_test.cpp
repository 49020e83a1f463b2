#include <sstream>

#include <gtest/gtest.h>

#include "qdr/bench.hpp"

namespace {

qdr::BenchConfig small_config() {
  qdr::BenchConfig c;
  c.synth.object_count = 600;
  c.synth.seed = 5;
  c.queries.count = 15;
  return c;
}

const qdr::BenchRow& row(const qdr::BenchReport& r, const std::string& axis, double value,
                         const std::string& engine) {
  for (const auto& x : r.rows)
    if (x.axis == axis && x.value == value && x.engine == engine) return x;
  throw std::runtime_error("row not found");
}

TEST(Bench, DefaultPointAgreesForEveryEngine) {
  const auto report = qdr::run_bench(small_config());
  EXPECT_TRUE(report.passed());
  ASSERT_EQ(report.rows.size(), 4u);
  for (const auto& r : report.rows) {
    EXPECT_EQ(r.checked, 15u);
    EXPECT_EQ(r.agreed, 15u);
  }
  EXPECT_DOUBLE_EQ(row(report, "default", 0.0, "keyword-only").recall, 1.0);
}

TEST(Bench, KappaSweepNodeAccessesNonDecreasing) {
  auto c = small_config();
  c.engines = {"qdr"};
  c.kappas = {5, 10, 20, 40};
  const auto report = qdr::run_bench(c);
  ASSERT_TRUE(report.passed());
  double prev = 0.0;
  for (auto k : c.kappas) {
    const double n = row(report, "kappa", static_cast<double>(k), "qdr").median_node_accesses;
    EXPECT_GE(n, prev);
    prev = n;
  }
}

TEST(Bench, ReportEmbedsConfigAndTable) {
  auto c = small_config();
  c.engines = {"qdr", "linear"};
  c.tau_dups = {0.0, 0.05};
  const auto report = qdr::run_bench(c);
  std::ostringstream out;
  qdr::write_report(out, report);
  const auto text = out.str();
  EXPECT_NE(text.find("axis\tvalue\tengine"), std::string::npos);
  EXPECT_NE(text.find("tau_dup\t0.05\tqdr"), std::string::npos);
  const auto summary = nlohmann::json::parse(text.substr(text.find("---\n") + 4));
  EXPECT_EQ(summary["agreement"], "pass");
  EXPECT_EQ(summary["config"]["synth"]["seed"], 5);
  EXPECT_EQ(summary["config"]["sweeps"]["tau_dup"].size(), 2u);
}

TEST(Bench, UnknownEngineRejected) {
  auto c = small_config();
  c.engines = {"fancy"};
  EXPECT_THROW(qdr::run_bench(c), qdr::InvalidInput);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(qdr::median({3, 1, 2}), 2.0);
  EXPECT_EQ(qdr::median({4, 1, 2, 3}), 2.5);
  EXPECT_EQ(qdr::median({}), 0.0);
}

}  // namespace
