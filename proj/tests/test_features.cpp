#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "pmsm/features.hpp"
#include "support.hpp"

using namespace pmsm;

namespace {

std::vector<double> ewma_direct(std::span<const double> x, std::size_t span) {
  const double alpha = 2.0 / (static_cast<double>(span) + 1.0);
  std::vector<double> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i <= t; ++i) {
      const double w = std::pow(1.0 - alpha, static_cast<double>(i));
      num += w * x[t - i];
      den += w;
    }
    y[t] = num / den;
  }
  return y;
}

std::vector<double> random_series(Rng& rng, std::size_t n, double lo = -5, double hi = 5) {
  std::vector<double> x(n);
  for (double& v : x) v = rng.uniform(lo, hi);
  return x;
}

double total_variation(const std::vector<double>& x) {
  double tv = 0.0;
  for (std::size_t t = 1; t < x.size(); ++t) tv += std::abs(x[t] - x[t - 1]);
  return tv;
}

ProfileFrame electrical(double ud, double uq, double id, double iq, double speed = 1000,
                        double coolant = 30) {
  ProfileFrame f;
  f.profile_id = 1;
  f.set("u_d", {ud});
  f.set("u_q", {uq});
  f.set("i_d", {id});
  f.set("i_q", {iq});
  f.set("motor_speed", {speed});
  f.set("coolant", {coolant});
  return f;
}

const std::vector<Synthetic> kAll = parse_synthetic_set("all");

}  // namespace

TEST(Ewma, ConstantSeriesIsFixedPoint) {
  const std::vector<double> x(50, 3.25);
  for (std::size_t span : {1u, 2u, 7u, 1320u, 9480u})
    for (double v : ewma(x, span)) EXPECT_NEAR(v, 3.25, 1e-13);
}

TEST(Ewma, SingleElementAndEmpty) {
  const std::vector<double> one{4.5};
  EXPECT_EQ(ewma(one, 100), one);
  EXPECT_TRUE(ewma(std::vector<double>{}, 5).empty());
}

TEST(Ewma, ThreePointHandComputed) {
  const std::vector<double> x{1, 2, 3};
  const auto y = ewma(x, 3);
  EXPECT_NEAR(y[2], 4.25 / 1.75, 1e-15);
  EXPECT_NEAR(y[1], (2 + 0.5) / 1.5, 1e-15);
}

TEST(Ewma, MatchesDirectWeightedSum) {
  Rng rng(41);
  const std::size_t default_spans[] = {1320, 3360, 6360, 9480};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    const std::size_t span = trial % 5 == 4 ? 1 + rng.below(50) : default_spans[trial % 4];
    const auto x = random_series(rng, n);
    const auto a = ewma(x, span), b = ewma_direct(x, span);
    for (std::size_t t = 0; t < n; ++t) ASSERT_NEAR(a[t], b[t], 1e-10) << "span " << span;
  }
}

TEST(Ewma, BoundedByRunningPrefixExtremes) {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_series(rng, 1 + rng.below(200));
    const auto y = ewma(x, 1 + rng.below(500));
    double lo = x[0], hi = x[0];
    for (std::size_t t = 0; t < x.size(); ++t) {
      lo = std::min(lo, x[t]);
      hi = std::max(hi, x[t]);
      EXPECT_GE(y[t], lo - 1e-12);
      EXPECT_LE(y[t], hi + 1e-12);
    }
  }
}

TEST(Ewma, HugeSpanApproachesPrefixMean) {
  Rng rng(43);
  const auto x = random_series(rng, 100);
  const auto y = ewma(x, 1000000);
  double sum = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    sum += x[t];
    EXPECT_LT(std::abs(y[t] - sum / static_cast<double>(t + 1)), 1e-3);
  }
}

TEST(Ewma, LargerSpanHasNoMoreTotalVariation) {
  Rng rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    // Monotone trend plus noise.
    std::vector<double> x(200);
    const double slope = rng.uniform(-0.1, 0.1);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = slope * t + rng.uniform(-1, 1);
    const std::size_t s1 = 1 + rng.below(100);
    const std::size_t s2 = s1 + 1 + rng.below(5000);
    EXPECT_LE(total_variation(ewma(x, s2)), total_variation(ewma(x, s1)) + 1e-9);
  }
}

TEST(Synthetic, PythagoreanVoltage) {
  const auto f = derive_synthetic(electrical(3, 4, 0, 0), kAll);
  EXPECT_EQ(f.column("U")[0], 5.0);
}

TEST(Synthetic, ZeroCurrentAnnihilatesProducts) {
  const auto f = derive_synthetic(electrical(3, 4, 0, 0), kAll);
  for (const char* n : {"I", "S", "P", "IMM", "IMC", "SMM", "SMC"}) EXPECT_EQ(f.column(n)[0], 0.0) << n;
}

TEST(Synthetic, PowerAndApparentPower) {
  const auto f = derive_synthetic(electrical(1, 2, 3, 4, 100, 20), kAll);
  EXPECT_NEAR(f.column("P")[0], 11.0, 1e-15);
  EXPECT_NEAR(f.column("S")[0], std::sqrt(5.0) * 5.0, 1e-12);
  EXPECT_NEAR(f.column("IMM")[0], 500.0, 1e-12);
  EXPECT_NEAR(f.column("IMC")[0], 100.0, 1e-12);
  EXPECT_NEAR(f.column("SMC")[0], std::sqrt(5.0) * 100.0, 1e-12);
}

TEST(Synthetic, SelectionRestrictsColumns) {
  const auto f = derive_synthetic(electrical(1, 1, 1, 1), parse_synthetic_set("imc-smc"));
  EXPECT_TRUE(f.has("IMC"));
  EXPECT_FALSE(f.has("IMM"));
  EXPECT_THROW(parse_synthetic_set("bogus"), ConfigError);
}

TEST(Synthetic, MissingSourceIsSchemaError) {
  ProfileFrame f;
  f.set("u_d", {1.0});
  EXPECT_THROW(derive_synthetic(f, kAll), SchemaError);
}

TEST(FeatureConfig, DefaultIs65Channels) {
  FeatureConfig c;
  EXPECT_EQ(c.attribute_names().size(), 13u);
  EXPECT_EQ(c.channel_count(), 65u);
  EXPECT_EQ(c.channel_names().size(), 65u);
  c.synthetic = parse_synthetic_set("imm-smm");
  EXPECT_EQ(c.channel_count(), 65u);
  c.synthetic = parse_synthetic_set("all");
  EXPECT_EQ(c.channel_count(), 15u * 5u);
  c.include_raw = false;
  EXPECT_EQ(c.channel_count(), 15u * 4u);
}

TEST(FeatureConfig, SpansMustIncrease) {
  FeatureConfig c;
  c.spans = {5, 5};
  EXPECT_THROW(c.validate(), ConfigError);
  c.spans = {0};
  EXPECT_THROW(c.validate(), ConfigError);
  c.spans = {3, 1};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(BuildChannels, LayoutAndPerProfileSmoothing) {
  const auto frames = synthesize(5, 2, 60);
  FeatureConfig c;
  c.spans = {3, 10};
  const auto cf = build_channels(frames[1], c);
  ASSERT_EQ(cf.features.cols(), 13u * 3u);
  const auto& coolant = frames[1].column("coolant");
  const auto sm = ewma(coolant, 10);
  const std::size_t coolant_idx = 1;  // predictors: ambient, coolant, ...
  for (std::size_t t = 0; t < 60; ++t) {
    EXPECT_EQ(cf.features(t, coolant_idx), coolant[t]);
    EXPECT_EQ(cf.features(t, 2 * 13 + coolant_idx), sm[t]);
  }
  // Smoothing restarts: the first smoothed value equals the raw value.
  EXPECT_EQ(cf.features(0, 13 + coolant_idx), coolant[0]);
  EXPECT_EQ(cf.targets(5, 0), frames[1].column("stator_winding")[5]);
  EXPECT_EQ(cf.targets(5, 3), frames[1].column("pm")[5]);
}

TEST(Standardize, TwoPointChannel) {
  ChannelFrame f;
  f.features = Matrix{{0.0}, {2.0}};
  f.targets = Matrix(2, 4, 1.0);
  std::vector<ChannelFrame> fs{f};
  const auto s = standardize(fs);
  EXPECT_EQ(s.channel_mean[0], 1.0);
  EXPECT_EQ(s.channel_std[0], 1.0);
  EXPECT_EQ(fs[0].features(0, 0), -1.0);
  EXPECT_EQ(fs[0].features(1, 0), 1.0);
  EXPECT_EQ(s.target_std[0], kStdFloor);
}

TEST(Standardize, RefitOnStandardizedDataIsIdentity) {
  Rng rng(45);
  std::vector<ChannelFrame> fs(3);
  for (auto& f : fs) {
    f.features = pmsm::test::random_matrix(rng, 40, 5, -10, 30);
    f.targets = pmsm::test::random_matrix(rng, 40, 4);
  }
  standardize(fs);
  const auto before = fs;
  const auto s2 = standardize(fs);
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_NEAR(s2.channel_mean[c], 0.0, 1e-9);
    EXPECT_NEAR(s2.channel_std[c], 1.0, 1e-9);
  }
  for (std::size_t i = 0; i < fs.size(); ++i)
    EXPECT_LE(max_abs_diff(fs[i].features, before[i].features), 1e-9);
}

TEST(Standardize, TestTransformUsesTrainStats) {
  Rng rng(46);
  std::vector<ChannelFrame> train(2);
  for (auto& f : train) {
    f.features = pmsm::test::random_matrix(rng, 30, 3, 0, 10);
    f.targets = Matrix(30, 4);
  }
  ChannelFrame test;
  test.features = pmsm::test::random_matrix(rng, 20, 3, 5, 20);
  test.targets = Matrix(20, 4);
  const ChannelFrame raw = test;
  const auto s = standardize(train);
  apply_standardization(test, s);
  for (std::size_t t = 0; t < 20; ++t)
    for (std::size_t c = 0; c < 3; ++c)
      EXPECT_NEAR(test.features(t, c), (raw.features(t, c) - s.channel_mean[c]) / s.channel_std[c],
                  1e-15);
  ChannelFrame bad;
  bad.features = Matrix(2, 4);
  EXPECT_THROW(apply_standardization(bad, s), ShapeError);
}

TEST(Standardize, TargetUnitsRoundTrip) {
  StandardizationStats s;
  s.target_mean = {10, 20, 30, 40};
  s.target_std = {2, 4, 8, 16};
  for (std::size_t k = 0; k < 4; ++k)
    EXPECT_NEAR(to_physical_units(s, k, to_model_units(s, k, 37.5)), 37.5, 1e-12);
  s.standardize_targets = false;
  EXPECT_EQ(to_model_units(s, 2, 37.5), 37.5);
}

namespace {

ChannelFrame ramp_frame(int id, std::size_t n, std::size_t channels) {
  ChannelFrame f;
  f.profile_id = id;
  f.features = Matrix(n, channels);
  f.targets = Matrix(n, 4);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < channels; ++c) f.features(t, c) = id * 1000.0 + t + 0.01 * c;
    for (std::size_t k = 0; k < 4; ++k) f.targets(t, k) = id * 1000.0 + t + 0.1 * k;
  }
  return f;
}

}  // namespace

TEST(Windowize, BoundaryCounts) {
  FeatureConfig c;
  EXPECT_EQ(windowize({ramp_frame(1, 180, 2)}, c).size(), 1u);
  EXPECT_EQ(windowize({ramp_frame(1, 200, 2)}, c).size(), 21u);
  c.stride = 7;
  EXPECT_EQ(windowize({ramp_frame(1, 200, 2)}, c).size(), 3u);  // ends 179, 186, 193
}

TEST(Windowize, ShortFramesSkippedWithWarning) {
  FeatureConfig c;
  c.window = 10;
  std::vector<std::string> warnings;
  const auto t = windowize({ramp_frame(1, 5, 2), ramp_frame(2, 12, 2)}, c,
                           [&](const std::string& m) { warnings.push_back(m); });
  EXPECT_EQ(t.size(), 3u);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("profile 1"), std::string::npos);
}

TEST(Windowize, ProvenanceReconstructsRawSlices) {
  FeatureConfig c;
  c.window = 6;
  c.stride = 2;
  std::vector<ChannelFrame> frames{ramp_frame(3, 20, 4), ramp_frame(8, 11, 4)};
  const auto source = frames;
  const auto t = windowize(frames, c);
  std::set<std::pair<int, std::size_t>> seen;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& w = t.windows()[i];
    EXPECT_TRUE(seen.insert({w.profile_id, w.end}).second);
    const ChannelFrame& f = w.profile_id == 3 ? source[0] : source[1];
    const Matrix x = t.window_inputs(i);
    for (std::size_t s = 0; s < c.window; ++s)
      for (std::size_t ch = 0; ch < 4; ++ch) EXPECT_EQ(x(s, ch), f.features(w.end + 1 - c.window + s, ch));
    const auto tgt = t.target(i);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(tgt[k], f.targets(w.end, k));
  }
  // No window crosses a profile boundary: every value of window i shares the profile's offset.
  const SequenceBatch b = t.gather_range(0, t.size());
  ASSERT_EQ(b.steps.size(), 6u);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const int id = t.windows()[i].profile_id;
    for (std::size_t s = 0; s < 6; ++s)
      EXPECT_EQ(std::floor(b.steps[s](i, 0) / 1000.0), id);
  }
}

TEST(Correlation, SelfCorrelationWithOneTarget) {
  Rng rng(47);
  ProfileFrame f;
  const std::size_t n = 20000;
  std::vector<double> a(n), b(n), c(n), d(n);
  for (std::size_t t = 0; t < n; ++t) {
    a[t] = rng.normal();
    b[t] = rng.normal();
    c[t] = rng.normal();
    d[t] = rng.normal();
  }
  f.set("t1", a);
  f.set("t2", b);
  f.set("t3", c);
  f.set("t4", d);
  f.set("cand", a);
  const std::vector<ProfileFrame> frames{f};
  const std::vector<std::string> targets{"t1", "t2", "t3", "t4"};
  EXPECT_NEAR(avg_abs_correlation(frames, "cand", targets), 0.25, 0.02);
}

TEST(Correlation, ConstantCandidateIsUndefined) {
  ProfileFrame f;
  f.set("t", {1, 2, 3});
  f.set("k", {5, 5, 5});
  const std::vector<ProfileFrame> frames{f};
  const std::vector<std::string> targets{"t"};
  try {
    avg_abs_correlation(frames, "k", targets);
    FAIL();
  } catch (const UndefinedCorrelation& e) {
    EXPECT_NE(std::string(e.what()).find("'k'"), std::string::npos);
  }
}

TEST(Correlation, PooledOverFramesAndBounded) {
  Rng rng(48);
  std::vector<ProfileFrame> frames(3);
  for (auto& f : frames) {
    std::vector<double> x(100), y(100);
    for (std::size_t t = 0; t < 100; ++t) {
      x[t] = rng.normal();
      y[t] = 2.0 * x[t] + 0.1 * rng.normal();
    }
    f.set("x", x);
    f.set("y", y);
  }
  const std::vector<std::string> targets{"y"};
  const double r = avg_abs_correlation(frames, "x", targets);
  EXPECT_GT(r, 0.99);
  EXPECT_LE(r, 1.0 + 1e-12);
}
