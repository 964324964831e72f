#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "marqoe/pipeline.hpp"
#include "marqoe/prediction.hpp"
#include "support.hpp"

using namespace marqoe;

namespace {

PoseHistory history_from(std::vector<std::pair<int, double>> xs, int query) {
  PoseHistory h;
  h.query_frame = query;
  for (auto [k, x] : xs) {
    Pose p;
    p.tx = x;
    h.entries.emplace_back(k, p);
  }
  return h;
}

}  // namespace

TEST_CASE("build_history windows") {
  const PoseTrace t = testsup::constant_trace(300, 30.0);

  SECTION("3 Hz, f=30, H=30 picks uploads 10,20,30") {
    const SampledTrace s = downsample(t, 3.0);
    const PoseHistory h = build_history(s, 30, 30);
    REQUIRE(h.size() == 3);
    CHECK(h.entries[0].first == 10);
    CHECK(h.entries[1].first == 20);
    CHECK(h.entries[2].first == 30);
    CHECK(h.query_frame == 30);
  }
  SECTION("window smaller than a stride can be empty") {
    const SampledTrace s = downsample(t, 3.0);
    const PoseHistory h = build_history(s, 15, 3);
    CHECK(h.empty());
  }
  SECTION("full-rate trace fills the window densely") {
    const SampledTrace s = downsample(t, 30.0);
    const PoseHistory h = build_history(s, 5, 3);
    REQUIRE(h.size() == 3);
    CHECK(h.entries[0].first == 3);
    CHECK(h.entries[2].first == 5);
  }
  SECTION("query frame outside the trace is rejected") {
    const SampledTrace s = downsample(t, 3.0);
    CHECK_THROWS_AS(build_history(s, 300, 30), DomainError);
  }
}

TEST_CASE("linear regression prediction is exact on collinear data") {
  const PoseHistory h = history_from({{0, 0.0}, {10, 1.0}, {20, 2.0}}, 20);
  const Pose p = predict_pose(h, 10, PredictMethod::LinearRegression);
  CHECK(p.tx == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("constant history predicts the same pose") {
  PoseHistory h;
  h.query_frame = 40;
  Pose c;
  c.tx = 1.5;
  c.theta_x = 33.0;
  for (int k : {10, 20, 30, 40}) h.entries.emplace_back(k, c);
  const Pose p = predict_pose(h, 25, PredictMethod::LinearRegression);
  CHECK(p.tx == Catch::Approx(1.5).margin(1e-12));
  CHECK(p.theta_x == Catch::Approx(33.0).margin(1e-12));
}

TEST_CASE("two-point line extrapolates through frame 15") {
  const PoseHistory h = history_from({{0, 0.0}, {10, 2.0}}, 10);
  const Pose p = predict_pose(h, 5, PredictMethod::LinearRegression);
  CHECK(p.tx == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("persistence returns the newest pose; single entry falls back") {
  const PoseHistory h = history_from({{0, 1.0}, {10, 7.0}}, 10);
  CHECK(predict_pose(h, 5, PredictMethod::Persistence).tx == 7.0);
  const PoseHistory h1 = history_from({{10, 7.0}}, 10);
  CHECK(predict_pose(h1, 5, PredictMethod::LinearRegression).tx == 7.0);
  CHECK_THROWS_AS(predict_pose(PoseHistory{}, 5, PredictMethod::Persistence), DomainError);
}

TEST_CASE("angles are unwrapped across the -180/180 seam") {
  PoseHistory h;
  h.query_frame = 20;
  for (auto [k, yaw] : std::vector<std::pair<int, double>>{{0, 170.0}, {10, 175.0}, {20, -180.0}}) {
    Pose p;
    p.theta_x = yaw;
    h.entries.emplace_back(k, p);
  }
  // unwrapped sequence 170, 175, 180 continues to 185 -> -175
  const Pose p = predict_pose(h, 10, PredictMethod::LinearRegression);
  CHECK(p.theta_x == Catch::Approx(-175.0).margin(1e-9));
}

TEST_CASE("prediction equivariance properties") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int rep = 0; rep < 100; ++rep) {
    PoseHistory h;
    h.query_frame = 30;
    for (int k : {6, 12, 18, 24, 30}) {
      Pose p;
      p.tx = u(rng);
      p.ty = u(rng);
      p.tz = u(rng);
      h.entries.emplace_back(k, p);
    }
    const Pose base = predict_pose(h, 7, PredictMethod::LinearRegression);

    // translation equivariance
    const Vec3 shift{u(rng), u(rng), u(rng)};
    PoseHistory hs = h;
    for (auto& [k, p] : hs.entries) {
      p.tx += shift.x;
      p.ty += shift.y;
      p.tz += shift.z;
    }
    const Pose shifted = predict_pose(hs, 7, PredictMethod::LinearRegression);
    CHECK(shifted.tx == Catch::Approx(base.tx + shift.x).margin(1e-9));
    CHECK(shifted.ty == Catch::Approx(base.ty + shift.y).margin(1e-9));
    CHECK(shifted.tz == Catch::Approx(base.tz + shift.z).margin(1e-9));

    // time-shift invariance
    PoseHistory ht = h;
    ht.query_frame += 1000;
    for (auto& [k, p] : ht.entries) k += 1000;
    const Pose tshift = predict_pose(ht, 7, PredictMethod::LinearRegression);
    CHECK(tshift.tx == Catch::Approx(base.tx).margin(1e-9));
  }
}

TEST_CASE("least squares residual is at a stationary point") {
  // numerical gradient of sum (y - a - b x)^2 at the fitted line is ~0
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> xs{0, 10, 20, 30, 40}, ys(5);
  for (double& y : ys) y = u(rng);
  const double at60 = detail::ols_extrapolate(xs, ys, 60.0);
  const double at70 = detail::ols_extrapolate(xs, ys, 70.0);
  const double slope = (at70 - at60) / 10.0;
  const double intercept = at60 - slope * 60.0;
  const auto sse = [&](double a, double b) {
    double s = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      const double r = ys[i] - a - b * xs[i];
      s += r * r;
    }
    return s;
  };
  const double h = 1e-6;
  const double scale = 1.0 + sse(intercept, slope);
  const double ga = (sse(intercept + h, slope) - sse(intercept - h, slope)) / (2 * h);
  const double gb = (sse(intercept, slope + h) - sse(intercept, slope - h)) / (2 * h);
  CHECK(std::abs(ga) <= 1e-6 * scale);
  CHECK(std::abs(gb) <= 1e-4 * scale);  // slope axis is stiffer (x up to 40)
}

TEST_CASE("denser uploads do not hurt prediction on smooth motion") {
  const PoseTrace t = testsup::walker_trace();
  const PipelineConfig cfg = testsup::default_pipeline();
  auto mean_err = [&](double lambda) {
    double sum = 0.0;
    size_t n = 0;
    for (const FramePrediction& fp : predict_frames(t, cfg, lambda)) {
      if (!fp.has_prediction) continue;
      const Pose& truth = t.poses[static_cast<size_t>(fp.frame)];
      sum += (fp.predicted.position() - truth.position()).norm() +
             std::abs(angle_delta_deg(fp.predicted.theta_x, truth.theta_x));
      ++n;
    }
    return sum / static_cast<double>(n);
  };
  const double e1 = mean_err(1.0), e3 = mean_err(3.0), e10 = mean_err(10.0), e30 = mean_err(30.0);
  CHECK(e3 <= e1 * 1.05);
  CHECK(e10 <= e3 * 1.05);
  CHECK(e30 <= e10 * 1.05);
}

TEST_CASE("clone of the same hypothesis class reproduces the deployed predictor") {
  const PoseTrace t = testsup::walker_trace();
  const PipelineConfig cfg = testsup::default_pipeline();
  const auto samples = collect_clone_samples(t, cfg, {3.0, 10.0});
  REQUIRE(samples.size() > 100);
  const ClonedPredictor clone = fit_clone(samples, PredictMethod::LinearRegression);
  CHECK(clone_loss(clone, samples) < 1e-9);
}

TEST_CASE("persistence clone outputs the newest pose") {
  PoseHistory h;
  h.query_frame = 10;
  Pose p;
  p.tx = 4.2;
  h.entries.emplace_back(10, p);
  std::vector<CloneSample> samples(1);
  samples[0].history = h;
  samples[0].target_frame = 15;
  samples[0].target = p;
  const ClonedPredictor clone = fit_clone(samples, PredictMethod::Persistence);
  CHECK(clone.predict(h, 5).tx == 4.2);
  CHECK(clone_loss(clone, samples) < 1e-18);
}

TEST_CASE("persistence clone loss equals the enumerated extrapolation gap") {
  // 10-frame trace with quadratic x motion; deployed predictor is the OLS
  // line, clone is restricted to persistence.
  PoseTrace t;
  t.user_id = "quad";
  t.frame_rate = 10.0;
  for (int f = 0; f < 10; ++f) {
    Pose p;
    p.tx = 0.01 * f * f;
    p.tz = 1.6;
    t.poses.push_back(p);
  }
  PipelineConfig cfg = testsup::default_pipeline();
  cfg.warmup_frames = 4;
  cfg.predictor.history_frames = 4;
  const auto samples = collect_clone_samples(t, cfg, {10.0});
  REQUIRE(!samples.empty());
  const ClonedPredictor clone = fit_clone(samples, PredictMethod::Persistence);

  double expect = 0.0;
  for (const CloneSample& s : samples) {
    for (int c = 0; c < 6; ++c) {
      double d = s.history.newest().second.component(c) - s.target.component(c);
      if (Pose::is_angle_component(c))
        d = angle_delta_deg(s.history.newest().second.component(c), s.target.component(c));
      expect += d * d;
    }
  }
  expect /= static_cast<double>(samples.size());
  CHECK(clone_loss(clone, samples) == Catch::Approx(expect).margin(1e-12));
  CHECK(expect > 0.0);
}

TEST_CASE("fit_clone rejects an empty training set") {
  CHECK_THROWS_AS(fit_clone({}, PredictMethod::LinearRegression), DomainError);
}

TEST_CASE("clone serialization round-trips") {
  const PoseTrace t = testsup::walker_trace();
  const PipelineConfig cfg = testsup::default_pipeline();
  const auto samples = collect_clone_samples(t, cfg, {6.0});
  const ClonedPredictor clone = fit_clone(samples, PredictMethod::LinearRegression);
  const ClonedPredictor back = ClonedPredictor::from_json(clone.to_json());
  REQUIRE(back.groups.size() == clone.groups.size());
  CHECK(clone_loss(back, samples) == Catch::Approx(clone_loss(clone, samples)).margin(1e-15));
}
