#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "marqoe/dtwin.hpp"
#include "support.hpp"

using namespace marqoe;

namespace {

std::vector<TrainingSample> toy_samples(int n, int label, double lambda, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<TrainingSample> out;
  for (int i = 0; i < n; ++i) {
    Pose p;
    for (int c = 0; c < 6; ++c) p.set_component(c, u(rng));
    out.push_back(TrainingSample::make(p, lambda, label));
  }
  return out;
}

QoeHyperparams fast_hyper(std::uint64_t seed = 1) {
  QoeHyperparams hp;
  hp.hidden = 12;
  hp.max_epochs = 200;
  hp.seed = seed;
  return hp;
}

}  // namespace

TEST_CASE("training set from a constant-pose trace is all top-bin") {
  const PoseTrace t = testsup::constant_trace();
  const PipelineConfig cfg = testsup::default_pipeline();
  const auto clone_samples = collect_clone_samples(t, cfg, {3.0, 30.0});
  const ClonedPredictor clone = fit_clone(clone_samples, PredictMethod::LinearRegression);
  const auto samples = generate_training_set(t, cfg, clone, {3.0, 30.0}, 10);
  REQUIRE(!samples.empty());
  for (const TrainingSample& s : samples) CHECK(s.label == 10);
}

TEST_CASE("trace that never faces the grid yields no samples") {
  PoseTrace t = testsup::constant_trace();
  for (Pose& p : t.poses) p.theta_x = -180.0;  // looking away, grid is toward +x
  const PipelineConfig cfg = testsup::default_pipeline();
  const auto clone_samples = collect_clone_samples(t, cfg, {30.0});
  const ClonedPredictor clone = fit_clone(clone_samples, PredictMethod::LinearRegression);
  CHECK_THROWS_AS(generate_training_set(t, cfg, clone, {30.0}, 10), DataError);
}

TEST_CASE("denser uploads shift labels upward on a moving trace") {
  const PoseTrace t = testsup::walker_trace();
  const PipelineConfig cfg = testsup::default_pipeline();
  const auto clone_samples = collect_clone_samples(t, cfg, {3.0, 30.0});
  const ClonedPredictor clone = fit_clone(clone_samples, PredictMethod::LinearRegression);
  const auto s3 = generate_training_set(t, cfg, clone, {3.0}, 10);
  const auto s30 = generate_training_set(t, cfg, clone, {30.0}, 10);
  // empirical CDF of labels at 30 Hz lies at or below (to the right of) 3 Hz
  for (int k = 0; k <= 10; ++k) {
    const auto cdf = [&](const std::vector<TrainingSample>& v) {
      size_t c = 0;
      for (const auto& s : v)
        if (s.label <= k) ++c;
      return static_cast<double>(c) / static_cast<double>(v.size());
    };
    CHECK(cdf(s30) <= cdf(s3) + 0.02);
  }
}

TEST_CASE("single-label training concentrates the output") {
  const auto samples = toy_samples(60, 7, 3.0, 42);
  const QoeModel m = fit_qoe(samples, 10, fast_hyper());
  for (int i = 0; i < 10; ++i) {
    const auto p = m.distribution(samples[static_cast<size_t>(i)].features);
    CHECK(p[7] >= 0.9);
  }
}

TEST_CASE("separable clusters are learned to high accuracy") {
  auto a = toy_samples(80, 2, 1.0, 1);
  const auto b = toy_samples(80, 9, 30.0, 2);
  a.insert(a.end(), b.begin(), b.end());
  const QoeModel m = fit_qoe(a, 10, fast_hyper(3));
  CHECK(qoe_accuracy(m, a) >= 0.95);
}

TEST_CASE("untrained model outputs a near-uniform distribution") {
  const QoeModel m = make_qoe_model(10, 16, 5, {0, 0, 0, 0, 0, 0, 0},
                                    {1, 1, 1, 1, 1, 1, 1});
  Pose p;
  p.tx = 0.3;
  const auto probs = m.distribution(2.0, p);
  double entropy = 0.0;
  for (double q : probs) {
    CHECK(q > 0.0);
    entropy -= q * std::log(q);
  }
  CHECK(entropy >= 0.95 * std::log(11.0));
}

TEST_CASE("model outputs are valid distributions") {
  const auto samples = toy_samples(50, 4, 6.0, 9);
  const QoeModel m = fit_qoe(samples, 10, fast_hyper(11));
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::array<double, 7> x{};
    for (double& v : x) v = u(rng);
    const auto p = m.distribution(x);
    double sum = 0.0;
    for (double q : p) {
      CHECK(q >= 0.0);
      sum += q;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("hit probability boundary and tail cases") {
  const QoeModel m = make_qoe_model(10, 8, 7, {0, 0, 0, 0, 0, 0, 0},
                                    {1, 1, 1, 1, 1, 1, 1});
  Pose p;
  CHECK(hit_probability(m, 3.0, p, 0.0) == 1.0);
  CHECK(hit_probability(m, 3.0, p, 1.0000001) == 0.0);
  // zero output layer -> exactly uniform over 11 levels
  CHECK(hit_probability(m, 3.0, p, 0.75) == Catch::Approx(3.0 / 11.0).margin(1e-12));
}

TEST_CASE("hit probability is non-increasing in the threshold") {
  const auto samples = toy_samples(40, 6, 10.0, 21);
  const QoeModel m = fit_qoe(samples, 10, fast_hyper(23));
  Pose p;
  p.ty = 0.4;
  double prev = 1.0;
  for (double v = 0.0; v <= 1.01; v += 0.05) {
    const double h = hit_probability(m, 10.0, p, v);
    CHECK(h <= prev + 1e-12);
    prev = h;
  }
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  std::uniform_int_distribution<int> bins_d(3, 10);
  std::uniform_int_distribution<int> hidden_d(2, 6);
  std::uniform_int_distribution<int> nsamp(3, 12);
  for (int rep = 0; rep < 100; ++rep) {
    const int bins = bins_d(rng);
    const int hidden = hidden_d(rng);
    QoeModel m = make_qoe_model(bins, hidden, rng(), {0, 0, 0, 0, 0, 0, 0},
                                {1, 1, 1, 1, 1, 1, 1});
    for (double& w : m.w1) w = u(rng);
    for (double& w : m.b1) w = 0.1 * u(rng);
    for (double& w : m.w2) w = u(rng);
    for (double& w : m.b2) w = 0.1 * u(rng);

    std::vector<TrainingSample> samples;
    std::uniform_int_distribution<int> lab(0, bins);
    const int n = nsamp(rng);
    for (int i = 0; i < n; ++i) {
      TrainingSample s;
      for (double& f : s.features) f = u(rng);
      s.label = lab(rng);
      samples.push_back(s);
    }
    const auto ws = detail::standardize(m, samples);
    std::vector<size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), size_t{0});

    std::vector<double> grad;
    detail::qoe_loss_grad_std(m, ws, idx, &grad);
    auto params = detail::qoe_get_params(m);
    std::uniform_int_distribution<size_t> pick(0, params.size() - 1);
    for (int probe = 0; probe < 6; ++probe) {
      const size_t i = pick(rng);
      const double h = 1e-5;
      auto plus = params, minus = params;
      plus[i] += h;
      minus[i] -= h;
      detail::qoe_set_params(m, plus);
      const double lp = detail::qoe_loss_grad_std(m, ws, idx, nullptr);
      detail::qoe_set_params(m, minus);
      const double lm = detail::qoe_loss_grad_std(m, ws, idx, nullptr);
      detail::qoe_set_params(m, params);
      const double num = (lp - lm) / (2.0 * h);
      CHECK(std::abs(num - grad[i]) <= 1e-4 * (std::abs(num) + std::abs(grad[i]) + 1e-6));
    }
  }
}

TEST_CASE("training is reproducible for a fixed seed") {
  const auto samples = toy_samples(50, 3, 5.0, 31);
  const QoeModel a = fit_qoe(samples, 10, fast_hyper(77));
  const QoeModel b = fit_qoe(samples, 10, fast_hyper(77));
  CHECK(a.w1 == b.w1);
  CHECK(a.w2 == b.w2);
  CHECK(a.b1 == b.b1);
  CHECK(a.b2 == b.b2);
}

TEST_CASE("empty training set is rejected") {
  CHECK_THROWS_AS(fit_qoe({}, 10, fast_hyper()), DomainError);
}

TEST_CASE("constant-pose twin is confident at every frequency") {
  const PoseTrace t = testsup::constant_trace();
  const PipelineConfig cfg = testsup::default_pipeline();
  QoeHyperparams hp = fast_hyper(5);
  const std::vector<double> freqs{1.0, 3.0, 10.0, 30.0};
  const TwinBundle twin = build_twin(t, cfg, freqs, 10, hp);
  for (double lam : freqs) {
    const Pose p = t.poses[0];
    CHECK(hit_probability(twin.qoe, lam, p, 0.9) >= 0.9);
    CHECK(hit_probability(twin.qoe, lam, p, 0.0) == 1.0);
  }
}

TEST_CASE("twin bundle serialization round-trips") {
  const PoseTrace t = testsup::walker_trace();
  const PipelineConfig cfg = testsup::default_pipeline();
  QoeHyperparams hp = fast_hyper(9);
  hp.max_epochs = 40;
  const TwinBundle twin = build_twin(t, cfg, {3.0, 10.0}, 10, hp);

  static auto dir = testsup::temp_dir("twin");
  const auto path = (dir / "twin.json").string();
  twin.save(path);
  const TwinBundle back = TwinBundle::load(path);
  CHECK(back.user_id == twin.user_id);
  CHECK(back.qoe.w1 == twin.qoe.w1);
  CHECK(back.qoe.feat_mean == twin.qoe.feat_mean);
  CHECK(back.meta.frequencies == twin.meta.frequencies);
  CHECK(back.clone.groups.size() == twin.clone.groups.size());

  Pose p = t.poses[40];
  CHECK(back.qoe.expected_hit_rate(3.0, p) ==
        Catch::Approx(twin.qoe.expected_hit_rate(3.0, p)).margin(1e-12));
}
