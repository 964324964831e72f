#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "marqoe/channel.hpp"

using namespace marqoe;

TEST_CASE("rate follows the log2 law") {
  CHECK(rate(1e6, 3.0) == Catch::Approx(2e6));
  CHECK(rate(1e6, 1.0) == Catch::Approx(1e6));
  CHECK(rate(5e6, 15.0) == Catch::Approx(2e7));
  CHECK_THROWS_AS(rate(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(rate(1e6, 0.0), DomainError);
}

TEST_CASE("rate monotonicity") {
  CHECK(rate(2e6, 3.0) == Catch::Approx(2.0 * rate(1e6, 3.0)));  // linear in b
  double prev = rate(1e6, 1.0);
  double prev_gain = 1e18;
  for (double g = 2.0; g < 40.0; g += 1.0) {
    const double r = rate(1e6, g);
    CHECK(r > prev);
    const double gain = r - prev;
    CHECK(gain < prev_gain);  // concave in gamma at equal spacing
    prev = r;
    prev_gain = gain;
  }
}

TEST_CASE("constant-SNR service moments are deterministic") {
  ChannelModel m;
  m.snr_model = SnrModel::Constant;
  m.gamma_bar = 3.0;
  m.alpha_bits = 1e6;
  const ServiceMoments sm = service_moments(m, 1e6);
  CHECK(sm.mean == Catch::Approx(0.5));
  CHECK(sm.second == Catch::Approx(0.25));

  m.gamma_bar = 1.0;
  m.alpha_bits = 2e6;
  CHECK(service_moments(m, 1e6).mean == Catch::Approx(2.0));
}

TEST_CASE("exponential-SNR moments match Monte Carlo") {
  ChannelModel m;
  m.snr_model = SnrModel::Exponential;
  m.gamma_bar = 10.0;
  m.gamma_min = 0.1;
  m.alpha_bits = 1e6;
  const double b = 1e6;
  const ServiceMoments sm = service_moments(m, b);

  std::mt19937_64 rng(12345);
  const std::uint64_t n = 10'000'000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const double s = m.alpha_bits / rate(b, m.sample_snr(rng));
    s1 += s;
    s2 += s * s;
    s4 += s * s * s * s;
  }
  const double nn = static_cast<double>(n);
  const double mc_mean = s1 / nn;
  const double mc_second = s2 / nn;
  const double se_mean = std::sqrt((mc_second - mc_mean * mc_mean) / nn);
  const double se_second = std::sqrt((s4 / nn - mc_second * mc_second) / nn);
  CHECK(std::abs(sm.mean - mc_mean) <= 3.0 * se_mean);
  CHECK(std::abs(sm.second - mc_second) <= 3.0 * se_second);
}

TEST_CASE("missing truncation is rejected for exponential SNR") {
  ChannelModel m;
  m.snr_model = SnrModel::Exponential;
  m.gamma_min = 0.0;
  try {
    service_moments(m, 1e6);
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("gamma_min") != std::string::npos);
  }
}

TEST_CASE("queue latency formula") {
  CHECK(queue_latency(1.0, {0.5, 0.25}) == Catch::Approx(0.25));
  CHECK(queue_latency(1e-9, {0.5, 0.25}) == Catch::Approx(0.0).margin(1e-8));
  CHECK(queue_latency(1.9, {0.5, 0.3}) == Catch::Approx(5.7));
  CHECK_THROWS_AS(queue_latency(2.0, {0.5, 0.25}), InstabilityError);
  CHECK_THROWS_AS(queue_latency(0.0, {0.5, 0.25}), DomainError);
}

TEST_CASE("queue latency is increasing in lambda and diverges at saturation") {
  const ServiceMoments m{0.5, 0.3};
  double prev = 0.0;
  for (double lam = 0.1; lam < 1.999; lam += 0.1) {
    const double tau = queue_latency(lam, m);
    CHECK(tau > prev);
    prev = tau;
  }
  CHECK(queue_latency(1.999, m) > 100.0);
}

TEST_CASE("max upload frequency walks the stride grid") {
  ChannelModel m;
  m.snr_model = SnrModel::Constant;
  m.gamma_bar = 3.0;
  m.alpha_bits = 1e6;
  const double b = 1e6;  // E[S] = 0.5 deterministic

  SECTION("tight budget forces stride 30") {
    const auto lam = max_upload_frequency(m, b, 0.25, 30.0, 64);
    REQUIRE(lam.has_value());
    CHECK(*lam == Catch::Approx(1.0));
  }
  SECTION("loose budget allows the closest stable grid point") {
    const auto lam = max_upload_frequency(m, b, 1e9, 30.0, 64);
    REQUIRE(lam.has_value());
    CHECK(*lam == Catch::Approx(30.0 / 16.0));  // first stride with util < 1
  }
  SECTION("infeasible when even the slowest stride is unstable") {
    const auto lam = max_upload_frequency(m, 1e3, 0.25, 30.0, 4);
    CHECK_FALSE(lam.has_value());
  }
  SECTION("full rate when service is fast and budget vacuous") {
    ChannelModel fast = m;
    fast.alpha_bits = 1e3;  // E[S] ~ 0.0005
    const auto lam = max_upload_frequency(fast, b, 1e9, 30.0, 64);
    REQUIRE(lam.has_value());
    CHECK(*lam == Catch::Approx(30.0));
  }
}

TEST_CASE("max upload frequency is monotone in b and T") {
  ChannelModel m;
  m.snr_model = SnrModel::Exponential;
  m.gamma_bar = 10.0;
  m.gamma_min = 0.1;
  m.alpha_bits = 1e5;

  double prev = 0.0;
  for (double b = 2e4; b <= 2e6; b *= 2.0) {
    const auto lam = max_upload_frequency(m, b, 0.05, 30.0, 64);
    const double v = lam.value_or(0.0);
    CHECK(v >= prev);
    prev = v;
  }
  prev = 0.0;
  for (double T = 0.001; T <= 10.0; T *= 4.0) {
    const auto lam = max_upload_frequency(m, 2e5, T, 30.0, 64);
    const double v = lam.value_or(0.0);
    CHECK(v >= prev);
    prev = v;
  }
}
