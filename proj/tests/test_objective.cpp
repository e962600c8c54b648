#include <gtest/gtest.h>

#include <cmath>

#include "bandmix/objective.hpp"
#include "test_util.hpp"

namespace bm = bandmix;
using bm::testing::random_audio;

namespace {

const bm::StftConfig kCfg{64, 16, "hann", true};

void expect_terms_near(const bm::LossBreakdown& a, const bm::LossBreakdown& b, double tol) {
  EXPECT_NEAR(a.time_term, b.time_term, tol);
  EXPECT_NEAR(a.mag_term, b.mag_term, tol);
  EXPECT_NEAR(a.real_term, b.real_term, tol);
  EXPECT_NEAR(a.imag_term, b.imag_term, tol);
  EXPECT_NEAR(a.total, b.total, tol);
}

}  // namespace

TEST(Objective, IdenticalInputsGiveExactZero) {
  const auto x = random_audio(2, 1000, 16000, 1);
  const auto l = bm::demix_loss(x, x, kCfg);
  EXPECT_EQ(l.time_term, 0.0);
  EXPECT_EQ(l.mag_term, 0.0);
  EXPECT_EQ(l.real_term, 0.0);
  EXPECT_EQ(l.imag_term, 0.0);
  EXPECT_EQ(l.total, 0.0);
}

TEST(Objective, ZeroEstimateClosedForm) {
  const auto r = random_audio(2, 1000, 16000, 2);
  const bm::AudioSegment zero(2, 1000, 16000);
  const auto l = bm::demix_loss(zero, r, kCfg);
  double mean_abs = 0;
  for (double v : r.samples()) mean_abs += std::abs(v);
  mean_abs /= 2000.0;
  EXPECT_NEAR(l.time_term, mean_abs, 1e-14);
  EXPECT_NEAR(l.mag_term, bm::testing::scalar_loop_loss(zero, r, kCfg).mag_term, 1e-10);
}

TEST(Objective, MatchesScalarLoopOracle) {
  const auto e = random_audio(2, 1000, 16000, 3);
  const auto r = random_audio(2, 1000, 16000, 4);
  const auto l = bm::demix_loss(e, r, kCfg);
  expect_terms_near(l, bm::testing::scalar_loop_loss(e, r, kCfg), 1e-10);
  EXPECT_DOUBLE_EQ(l.total, l.time_term + l.mag_term + l.real_term + l.imag_term);
}

TEST(Objective, SymmetricInArguments) {
  const auto e = random_audio(2, 777, 16000, 5);
  const auto r = random_audio(2, 777, 16000, 6);
  const auto a = bm::demix_loss(e, r, kCfg), b = bm::demix_loss(r, e, kCfg);
  EXPECT_EQ(a.time_term, b.time_term);
  EXPECT_EQ(a.mag_term, b.mag_term);
  EXPECT_EQ(a.real_term, b.real_term);
  EXPECT_EQ(a.imag_term, b.imag_term);
}

TEST(Objective, AbsolutelyHomogeneous) {
  const auto e = random_audio(2, 1000, 16000, 7);
  const auto r = random_audio(2, 1000, 16000, 8);
  const auto base = bm::demix_loss(e, r, kCfg);
  for (double a : {-2.5, 0.3, 7.0}) {
    auto ea = e, ra = r;
    for (auto& v : ea.samples()) v *= a;
    for (auto& v : ra.samples()) v *= a;
    const auto s = bm::demix_loss(ea, ra, kCfg);
    EXPECT_NEAR(s.time_term, std::abs(a) * base.time_term, 1e-10);
    EXPECT_NEAR(s.mag_term, std::abs(a) * base.mag_term, 1e-10);
    EXPECT_NEAR(s.real_term, std::abs(a) * base.real_term, 1e-10);
    EXPECT_NEAR(s.imag_term, std::abs(a) * base.imag_term, 1e-10);
  }
}

TEST(Objective, NonNegativeTerms) {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const auto l = bm::demix_loss(random_audio(1, 300, 8000, seed), random_audio(1, 300, 8000, seed + 100), kCfg);
    EXPECT_GE(l.time_term, 0);
    EXPECT_GE(l.mag_term, 0);
    EXPECT_GE(l.real_term, 0);
    EXPECT_GE(l.imag_term, 0);
  }
}

TEST(Objective, RejectsBadInputs) {
  const auto a = random_audio(2, 100, 16000, 1);
  EXPECT_THROW(bm::demix_loss(a, random_audio(2, 101, 16000, 1), kCfg), bm::InvalidArgument);
  EXPECT_THROW(bm::demix_loss(a, random_audio(1, 100, 16000, 1), kCfg), bm::InvalidArgument);
  EXPECT_THROW(bm::demix_loss(a, random_audio(2, 100, 8000, 1), kCfg), bm::InvalidArgument);
  auto bad = a;
  bad(1, 50) = std::nan("");
  EXPECT_THROW(bm::demix_loss(bad, a, kCfg), bm::NonFiniteError);
  EXPECT_THROW(bm::demix_loss_grad(a, bad, kCfg), bm::NonFiniteError);
}

TEST(Objective, GradientMatchesFiniteDifferencesAwayFromTies) {
  auto e = random_audio(2, 300, 16000, 20);
  const auto r = random_audio(2, 300, 16000, 21);
  const auto g = bm::demix_loss_grad(e, r, kCfg);
  const double h = 1e-7;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < e.samples().size(); ++i) {
    const double keep = e.samples()[i];
    e.samples()[i] = keep + h;
    const double up = bm::demix_loss(e, r, kCfg).total;
    e.samples()[i] = keep - h;
    const double down = bm::demix_loss(e, r, kCfg).total;
    e.samples()[i] = keep;
    const double num = (up - down) / (2 * h);
    if (std::abs(num - g.samples()[i]) > 1e-4 * std::max(std::abs(num), 1e-3)) ++bad;
  }
  EXPECT_EQ(bad, 0u);
}

TEST(Objective, GradientScalesLinearlyAndVanishesAtOptimum) {
  const auto e = random_audio(1, 200, 16000, 30);
  const auto r = random_audio(1, 200, 16000, 31);
  const auto g1 = bm::demix_loss_grad(e, r, kCfg);
  const auto g3 = bm::demix_loss_grad(e, r, kCfg, 3.0);
  for (std::size_t i = 0; i < g1.samples().size(); ++i)
    EXPECT_NEAR(g3.samples()[i], 3 * g1.samples()[i], 1e-15);
  const auto g0 = bm::demix_loss_grad(r, r, kCfg);
  for (double v : g0.samples()) EXPECT_EQ(v, 0.0);
}
