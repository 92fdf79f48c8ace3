#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "distest/core.hpp"
#include "distest/random.hpp"
#include "distest/transcript.hpp"

using namespace distest;

TEST(Distribution, RejectsBadInput) {
  EXPECT_THROW(Distribution({0.5, 0.4}), std::invalid_argument);
  EXPECT_THROW(Distribution({1.2, -0.2}), std::invalid_argument);
  EXPECT_THROW(Distribution({}), std::invalid_argument);
  EXPECT_NO_THROW(Distribution({0.25, 0.75}));
  EXPECT_NO_THROW(SubDistribution({0.25, 0.5}));
  EXPECT_THROW(SubDistribution({0.75, 0.5}), std::invalid_argument);
}

TEST(LpLoss, Arithmetic) {
  const Distribution third({1.0 / 3, 1.0 / 3, 1.0 / 3});
  const std::vector<double> corner{1.0, 0.0, 0.0};
  EXPECT_NEAR(lp_loss(corner, third, 1.0), 4.0 / 3.0, 1e-15);
  const Distribution half({0.5, 0.5});
  const std::vector<double> skew{0.75, 0.25};
  EXPECT_NEAR(lp_loss(skew, half, 2.0), 0.125, 1e-15);
  for (double p : {1.0, 1.5, 2.0, 3.0, 7.0}) EXPECT_EQ(lp_loss(third.probs(), third, p), 0.0);
}

TEST(LpLoss, Errors) {
  const Distribution half({0.5, 0.5});
  const std::vector<double> three{0.2, 0.3, 0.5};
  EXPECT_THROW(lp_loss(three, half, 2.0), std::invalid_argument);
  const std::vector<double> two{0.2, 0.8};
  EXPECT_THROW(lp_loss(two, half, 0.5), std::invalid_argument);
}

TEST(TwoPoint, Construction) {
  const auto a = make_two_point(0.2, 3, 1);
  EXPECT_DOUBLE_EQ(a[0], 0.6);
  EXPECT_DOUBLE_EQ(a[1], 0.4);
  EXPECT_DOUBLE_EQ(a[2], 0.0);
  const auto b = make_two_point(0.2, 3, 2);
  EXPECT_DOUBLE_EQ(b[0], 0.4);
  EXPECT_DOUBLE_EQ(b[1], 0.6);
  const auto c = make_two_point(0.0, 2, 1);
  EXPECT_DOUBLE_EQ(c[0], 0.5);
  EXPECT_DOUBLE_EQ(c[1], 0.5);
  EXPECT_THROW(make_two_point(0.2, 1, 1), std::invalid_argument);
  EXPECT_THROW(make_two_point(0.2, 3, 3), std::invalid_argument);
}

TEST(Instances, Families) {
  const auto u = make_instance(InstanceFamily::uniform(), 4, 0);
  for (std::size_t w = 0; w < 4; ++w) EXPECT_DOUBLE_EQ(u[w], 0.25);

  const auto point = make_instance(InstanceFamily::sparse(1), 5, 0);
  EXPECT_DOUBLE_EQ(point[0], 1.0);
  for (std::size_t w = 1; w < 5; ++w) EXPECT_DOUBLE_EQ(point[w], 0.0);

  // 1, 1/2, 1/3 normalized by 11/6
  const auto z = make_instance(InstanceFamily::zipf(1.0), 3, 0);
  EXPECT_NEAR(z[0], 6.0 / 11.0, 1e-15);
  EXPECT_NEAR(z[1], 3.0 / 11.0, 1e-15);
  EXPECT_NEAR(z[2], 2.0 / 11.0, 1e-15);

  const auto d1 = make_instance(InstanceFamily::dirichlet(0.5), 20, 7);
  const auto d2 = make_instance(InstanceFamily::dirichlet(0.5), 20, 7);
  const auto d3 = make_instance(InstanceFamily::dirichlet(0.5), 20, 8);
  EXPECT_TRUE(std::equal(d1.probs().begin(), d1.probs().end(), d2.probs().begin()));
  EXPECT_FALSE(std::equal(d1.probs().begin(), d1.probs().end(), d3.probs().begin()));

  EXPECT_THROW(make_instance(InstanceFamily::sparse(6), 5, 0), std::invalid_argument);
  EXPECT_THROW(make_instance(InstanceFamily::zipf(-1.0), 5, 0), std::invalid_argument);
  EXPECT_THROW(make_instance(InstanceFamily::dirichlet(0.0), 5, 0), std::invalid_argument);
}

TEST(Instances, ParseRoundTrip) {
  for (const char* text : {"uniform", "zipf:1.5", "sparse:3", "dirichlet:0.5", "two_point:0.1:2"}) {
    EXPECT_EQ(describe(parse_family(text)), text);
  }
  EXPECT_EQ(describe(parse_family("point")), "sparse:1");
  EXPECT_THROW(parse_family("gaussian"), std::invalid_argument);
}

TEST(Sampling, PointMassAndDeterminism) {
  Stream s(1);
  const auto point = Distribution({0.0, 0.0, 1.0, 0.0});
  const auto mat = sample(point, 7, 9, s);
  for (auto w : mat.data()) EXPECT_EQ(w, 2u);

  const auto u = make_instance(InstanceFamily::uniform(), 5, 0);
  Stream a(42), b(42);
  const auto x = sample(u, 20, 20, a);
  const auto y = sample(u, 20, 20, b);
  EXPECT_TRUE(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
}

TEST(Sampling, BinomialConcentration) {
  Stream s(3);
  const auto mat = sample(Distribution({0.5, 0.5}), 10000, 1000, s);
  const double zeros =
      static_cast<double>(std::count(mat.data().begin(), mat.data().end(), 0u)) / 1e7;
  EXPECT_NEAR(zeros, 0.5, 0.02);
}

TEST(Sampling, MatchesTargetFrequencies) {
  Stream s(11);
  const auto z = make_instance(InstanceFamily::zipf(1.0), 6, 0);
  const std::size_t total = 600000;
  const auto mat = sample(z, 600, 1000, s);
  std::vector<double> freq(6, 0.0);
  for (auto w : mat.data()) freq[w] += 1.0 / static_cast<double>(total);
  for (std::size_t w = 0; w < 6; ++w) {
    const double se = std::sqrt(z[w] * (1 - z[w]) / static_cast<double>(total));
    EXPECT_NEAR(freq[w], z[w], 5 * se) << w;
  }
}

TEST(Clip, Examples) {
  EXPECT_EQ(clip_to_unit(std::vector<double>{-0.2, 0.5}), (std::vector<double>{0.0, 0.5}));
  EXPECT_EQ(clip_to_unit(std::vector<double>{1.3, 0.1}), (std::vector<double>{1.0, 0.1}));
  EXPECT_EQ(clip_to_unit(std::vector<double>{0.4, 0.6}), (std::vector<double>{0.4, 0.6}));
  EXPECT_THROW(clip_to_unit(std::vector<double>{NAN}), std::invalid_argument);
}

TEST(Clip, NeverIncreasesLoss) {
  Stream s(5);
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t k = 2 + s() % 6;
    const auto truth = make_instance(InstanceFamily::dirichlet(0.7), k, s());
    std::vector<double> x(k);
    for (auto& v : x) v = 3.0 * s.uniform() - 1.0;
    const double p = 1.0 + 4.0 * s.uniform();
    EXPECT_LE(lp_loss(clip_to_unit(x), truth, p), lp_loss(x, truth, p) + 1e-15);
  }
}

TEST(SharedRandomness, LabelledStreams) {
  const SharedRandomness r(99);
  auto a = r.stream("hash", 3);
  auto b = r.stream("hash", 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());

  // distinct labels give distinct streams
  std::set<std::uint64_t> firsts;
  for (std::uint64_t i = 0; i < 1000; ++i) firsts.insert(r.stream("hash", i)());
  EXPECT_EQ(firsts.size(), 1000u);
  EXPECT_NE(r.derive("a"), r.derive("b"));

  // correlation smoke test between two labelled streams
  auto x = r.stream("left");
  auto y = r.stream("right");
  double sum = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) sum += (x.uniform() - 0.5) * (y.uniform() - 0.5);
  EXPECT_NEAR(sum / draws, 0.0, 4.0 / 12.0 / std::sqrt(draws));
}

TEST(Stream, PeekMatchesSequence) {
  Stream s(1234);
  Stream copy = s;
  for (std::uint64_t j = 0; j < 50; ++j) EXPECT_EQ(s.peek(j), copy());
}

TEST(BitMessage, UintRoundTrip) {
  BitMessage msg(12);
  msg.write_uint(0, 5, 19);
  msg.write_uint(5, 7, 100);
  EXPECT_EQ(msg.read_uint(0, 5), 19u);
  EXPECT_EQ(msg.read_uint(5, 7), 100u);
  EXPECT_EQ(msg.to_string(), "100111100100");
  EXPECT_THROW(msg.write_uint(10, 3, 1), std::out_of_range);
  EXPECT_THROW(msg.write_uint(0, 2, 4), std::invalid_argument);
}

TEST(ProtocolConfig, Validate) {
  ProtocolConfig c;
  EXPECT_NO_THROW(c.validate());
  c.l = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.l = 1;
  c.p = 0.9;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.p = 2;
  c.const_scale = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(parse_protocol("asr_tv"), ProtocolKind::asr_tv);
  EXPECT_THROW(parse_protocol("magic"), std::invalid_argument);
}
