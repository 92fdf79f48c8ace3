#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "distest/harness.hpp"

using namespace distest;

namespace {

Transcript well_formed(std::size_t m, std::size_t l) {
  Transcript t;
  for (std::size_t i = 0; i < m; ++i) t.append(i, BitMessage(l));
  return t;
}

bool mentions(const AuditResult& audit, const std::string& text) {
  for (const auto& v : audit.violations) {
    if (v.find(text) != std::string::npos) return true;
  }
  return false;
}

Sweep m_sweep(std::vector<double> grid, InstanceFamily family) {
  Sweep s;
  s.parameter = "m";
  s.grid = std::move(grid);
  s.instance = [family](const ProtocolConfig& c) { return make_instance(family, c.k, 0); };
  return s;
}

}  // namespace

TEST(BudgetAudit, Examples) {
  const auto ok = budget_audit(well_formed(5, 3), 5, 3);
  EXPECT_TRUE(ok.pass);
  EXPECT_EQ(ok.total_bits, 15u);

  Transcript short_msg;
  for (std::size_t i = 0; i < 5; ++i) short_msg.append(i, BitMessage(i == 2 ? 2 : 3));
  const auto bad = budget_audit(short_msg, 5, 3);
  EXPECT_FALSE(bad.pass);
  EXPECT_TRUE(mentions(bad, "encoder 2: message has 2 bits, expected 3"));

  const auto missing = budget_audit(well_formed(4, 3), 5, 3);
  EXPECT_FALSE(missing.pass);
  EXPECT_TRUE(mentions(missing, "missing encoder 4"));
}

TEST(BudgetAudit, OrderAndDuplicates) {
  Transcript swapped;
  swapped.append(1, BitMessage(2));
  swapped.append(0, BitMessage(2));
  EXPECT_TRUE(mentions(budget_audit(swapped, 2, 2), "out of order"));

  Transcript twice = well_formed(3, 2);
  twice.append(1, BitMessage(2));
  const auto audit = budget_audit(twice, 3, 2);
  EXPECT_TRUE(mentions(audit, "duplicate message from encoder 1"));
  EXPECT_TRUE(mentions(budget_audit(well_formed(4, 2), 3, 2), "unknown encoder 3"));
}

TEST(BudgetAudit, EveryProtocolIsExact) {
  struct Case {
    ProtocolKind kind;
    std::size_t m, n, k, l;
  };
  const Case cases[] = {
      {ProtocolKind::ar, 101, 64, 4, 3},        {ProtocolKind::asr, 256, 2, 100, 2},
      {ProtocolKind::asr, 77, 8, 20, 3},        {ProtocolKind::asr_tv, 150, 4, 30, 3},
      {ProtocolKind::compress, 300, 64, 16, 8}, {ProtocolKind::threshold_le2, 64, 32, 600, 10},
      {ProtocolKind::hash, 333, 1, 8, 3},       {ProtocolKind::plugin, 20, 10, 5, 7},
      {ProtocolKind::onebit, 200, 40, 2, 2},    {ProtocolKind::uniform, 7, 3, 9, 4},
  };
  for (const auto& c : cases) {
    const ProtocolConfig config{c.m, c.n, c.k, c.l, 2.0, 0, 1.0, c.kind};
    const auto inst = make_instance(InstanceFamily::zipf(1.0), c.k, 0);
    const auto report = estimate_risk(inst, config, 5, 1);
    EXPECT_TRUE(report.audit_pass) << to_string(c.kind);
  }
}

TEST(RunProtocol, RejectsMismatchedSamples) {
  const ProtocolConfig config{4, 2, 3, 2, 2.0, 0, 1.0, ProtocolKind::plugin};
  const SampleMatrix samples(4, 2, 4, std::vector<std::uint32_t>(8, 0));
  EXPECT_THROW(run_protocol(config, samples, SharedRandomness(1)), std::invalid_argument);
  const ProtocolConfig onebit{4, 2, 3, 2, 2.0, 0, 1.0, ProtocolKind::onebit};
  const SampleMatrix three(4, 2, 3, std::vector<std::uint32_t>(8, 0));
  EXPECT_THROW(run_protocol(onebit, three, SharedRandomness(1)), std::invalid_argument);
}

TEST(EstimateRisk, Determinism) {
  const auto z = make_instance(InstanceFamily::zipf(1.0), 6, 0);
  const ProtocolConfig config{64, 16, 6, 3, 2.0, 0, 1.0, ProtocolKind::ar};
  const auto a = estimate_risk(z, config, 40, 7, 1);
  const auto b = estimate_risk(z, config, 40, 7, 4);
  const auto c = estimate_risk(z, config, 40, 7, 3);
  EXPECT_EQ(a.mean_loss, b.mean_loss);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_EQ(a.mean_loss, c.mean_loss);
  const auto d = estimate_risk(z, config, 40, 8, 1);
  EXPECT_NE(a.mean_loss, d.mean_loss);
  EXPECT_THROW(estimate_risk(z, config, 1, 7), std::invalid_argument);
}

TEST(EstimateRisk, SurfacesTrialErrors) {
  const auto u = make_instance(InstanceFamily::uniform(), 100, 0);
  const ProtocolConfig config{8, 2, 100, 2, 2.0, 0, 1.0, ProtocolKind::asr};
  try {
    estimate_risk(u, config, 4, 1, 2);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("4 of 4 trials failed"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("insufficient encoders for recursion depth"), std::string::npos);
  }
}

TEST(EstimateRisk, ClippingNeverHurtsHashOnPointMass) {
  const auto point = make_instance(InstanceFamily::point(), 8, 0);
  const ProtocolConfig config{64, 1, 8, 2, 2.0, 0, 1.0, ProtocolKind::hash};
  for (std::size_t t = 0; t < 200; ++t) {
    Stream s(t);
    const auto samples = sample(point, 64, 1, s);
    const auto out = run_protocol(config, samples, SharedRandomness(t));
    EXPECT_LE(lp_loss(out.clipped, point, 2), lp_loss(out.raw, point, 2));
  }
}

TEST(WorstCase, UniformEstimatorPicksPointMass) {
  const ProtocolConfig config{16, 4, 5, 2, 2.0, 0, 1.0, ProtocolKind::uniform};
  const auto w = worst_case_risk({InstanceFamily::uniform(), InstanceFamily::point()}, config, 4, 1);
  EXPECT_EQ(w.instance, "sparse:1");
  EXPECT_EQ(w.all.size(), 4u);  // two listed plus the two-point pair
  EXPECT_EQ(w.all[0].mean_loss, 0.0);

  const auto single = worst_case_risk({InstanceFamily::point()}, config, 4, 1);
  EXPECT_EQ(single.instance, "sparse:1");
  EXPECT_THROW(worst_case_risk({}, config, 4, 1), std::invalid_argument);
}

TEST(WorstCase, HashIsNearlySymmetric) {
  const ProtocolConfig config{256, 1, 8, 3, 2.0, 0, 1.0, ProtocolKind::hash};
  const auto w = worst_case_risk({InstanceFamily::uniform(), InstanceFamily::zipf(1.0)}, config, 400, 2);
  const auto& uniform = w.all[0];
  EXPECT_GE(uniform.mean_loss + 3 * uniform.std_error + 3 * w.report.std_error, w.report.mean_loss);
  EXPECT_NEAR(two_point_epsilon(256, 1), 1.0 / 160.0, 1e-15);
}

TEST(Ols, ExactLine) {
  const std::vector<double> x{1, 2, 4, 8};
  const std::vector<double> y{3, 1.5, 0.75, 0.375};
  const auto fit = ols_loglog(x, y);
  EXPECT_NEAR(fit.slope, -1.0, 1e-12);
  EXPECT_NEAR(fit.slope_se, 0.0, 1e-12);
  EXPECT_NEAR(std::exp(fit.intercept), 3.0, 1e-12);
  EXPECT_THROW(ols_loglog(x, std::vector<double>{1, 0, 1, 1}), std::invalid_argument);
}

TEST(ScalingSlope, RejectsBadGrids) {
  const ProtocolConfig base{512, 256, 4, 4, 2.0, 0, 1.0, ProtocolKind::uniform};
  EXPECT_THROW(scaling_slope(base, m_sweep({512, 1024, 2048}, InstanceFamily::uniform()), 2, 1),
               std::invalid_argument);
  EXPECT_THROW(scaling_slope(base, m_sweep({512, 4096, 2048, 8192}, InstanceFamily::uniform()), 2, 1),
               std::invalid_argument);
  EXPECT_THROW(scaling_slope(base, m_sweep({512, 600, 700, 800}, InstanceFamily::uniform()), 2, 1),
               std::invalid_argument);

  // encoder counts must be whole numbers
  try {
    scaling_slope(base, m_sweep({0.5, 1, 2, 64}, InstanceFamily::uniform()), 2, 1);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("nonnegative integer"), std::string::npos);
  }
  try {
    ProtocolConfig wide = base;
    wide.k = 64;
    wide.n = 64;
    wide.l = 2;  // m = 4 has ml < k, m = 1024 does not
    scaling_slope(wide, m_sweep({4, 16, 64, 1024}, InstanceFamily::uniform()), 2, 1);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("regime crossing"), std::string::npos) << e.what();
  }
}

TEST(ScalingSlope, ConstantEstimatorIsFlat) {
  const ProtocolConfig base{512, 256, 4, 4, 2.0, 0, 1.0, ProtocolKind::uniform};
  const auto fit = scaling_slope(base, m_sweep({512, 1024, 2048, 4096, 8192}, InstanceFamily::zipf(1.0)), 4, 1);
  EXPECT_NEAR(fit.slope, 0.0, 0.05);
  for (const auto& r : fit.predictions) EXPECT_EQ(r.regime, Regime::high_n);
}

TEST(ScalingSlope, PluginHistogramIsParametric) {
  const ProtocolConfig base{16, 4, 2, 1, 2.0, 0, 1.0, ProtocolKind::plugin};
  const auto fit = scaling_slope(base, m_sweep({16, 32, 64, 128, 256}, InstanceFamily::zipf(1.0)), 2000, 3);
  EXPECT_NEAR(fit.slope, -1.0, 0.1);
}

TEST(ScalingSlope, HashVersusEncoders) {
  const ProtocolConfig base{256, 1, 8, 3, 2.0, 0, 1.0, ProtocolKind::hash};
  const auto fit =
      scaling_slope(base, m_sweep({256, 512, 1024, 2048, 4096}, InstanceFamily::uniform()), 400, 4);
  EXPECT_NEAR(fit.slope, -1.0, 0.15);
}

TEST(LowerBound, RisksAreNotBelowTheoreticalFloor) {
  struct Case {
    ProtocolKind kind;
    std::size_t m, n, k, l;
  };
  const Case cases[] = {
      {ProtocolKind::ar, 512, 256, 4, 4},       {ProtocolKind::asr, 512, 4, 20, 3},
      {ProtocolKind::compress, 300, 64, 16, 8}, {ProtocolKind::threshold_le2, 64, 32, 600, 10},
      {ProtocolKind::hash, 512, 1, 8, 3},       {ProtocolKind::plugin, 100, 10, 4, 2},
  };
  for (const auto& c : cases) {
    const ProtocolConfig config{c.m, c.n, c.k, c.l, 2.0, 0, 1.0, c.kind};
    const double eps = two_point_epsilon(c.m, c.n);
    const double floor = lower_bound(static_cast<double>(c.m), static_cast<double>(c.n),
                                     static_cast<double>(c.k), static_cast<double>(c.l), 2.0);
    for (std::size_t which : {1u, 2u}) {
      const auto inst = make_instance(InstanceFamily::two_point(eps, which), c.k, 0);
      const auto r = estimate_risk(inst, config, 100, 5);
      EXPECT_GE(r.mean_loss + 3 * r.std_error, floor / 10) << to_string(c.kind);
    }
  }
}
