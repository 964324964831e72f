#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "marqoe/common.hpp"
#include "marqoe/pipeline.hpp"

namespace marqoe {

/// Model input: the six predicted-pose components followed by the upload
/// frequency. Label: realized hit rate rounded to the nearest of L+1 levels.
struct TrainingSample {
  std::array<double, 7> features{};  // tx, ty, tz, theta_x, theta_y, theta_z, lambda
  int label = 0;

  static TrainingSample make(const Pose& predicted, double lambda, int label) {
    TrainingSample s;
    for (int c = 0; c < 6; ++c) s.features[static_cast<size_t>(c)] = predicted.component(c);
    s.features[6] = lambda;
    s.label = label;
    return s;
  }
};

inline int hit_rate_bin(double h, int bins) {
  const int k = static_cast<int>(std::lround(h * bins));
  return std::clamp(k, 0, bins);
}

/// Runs the deterministic pipeline with the cloned predictor at every swept
/// frequency and labels each rendered frame with its realized hit-rate bin.
/// Frames with an undefined hit rate (empty union) are excluded.
inline std::vector<TrainingSample> generate_training_set(const PoseTrace& trace,
                                                         const PipelineConfig& cfg,
                                                         const ClonedPredictor& clone,
                                                         const std::vector<double>& frequencies,
                                                         int bins) {
  if (frequencies.empty()) throw DomainError("frequency sweep is empty");
  if (bins < 1) throw DomainError("bins must be >= 1");
  std::vector<TrainingSample> out;
  for (double lambda : frequencies) {
    const PipelineRun run = run_pipeline(trace, cfg, lambda, &clone);
    for (const FrameOutcome& oc : run.frames) {
      if (!oc.hit_rate) continue;
      out.push_back(TrainingSample::make(oc.predicted, lambda, hit_rate_bin(*oc.hit_rate, bins)));
    }
  }
  if (out.empty()) throw DataError("no renderable frames produced any training sample");
  return out;
}

struct QoeHyperparams {
  int hidden = 32;
  int max_epochs = 400;
  double learning_rate = 0.5;
  double holdout_fraction = 0.2;
  int patience = 50;
  std::uint64_t seed = 1;
};

/// Per-user conditional hit-rate model: a two-layer network with tanh hidden
/// units and a normalized (L+1)-way output over hit-rate levels k/L.
struct QoeModel {
  std::string user_id;
  int bins = 10;    // L: levels are 0, 1/L, ..., 1
  int hidden = 32;
  std::vector<double> w1;  // hidden x 7
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // (bins+1) x hidden
  std::vector<double> b2;  // bins+1
  std::array<double, 7> feat_mean{};
  std::array<double, 7> feat_std{};

  int classes() const { return bins + 1; }

  std::vector<double> distribution(const std::array<double, 7>& raw) const {
    std::array<double, 7> x{};
    for (size_t i = 0; i < 7; ++i) x[i] = (raw[i] - feat_mean[i]) / feat_std[i];
    std::vector<double> h(static_cast<size_t>(hidden));
    for (int j = 0; j < hidden; ++j) {
      double a = b1[static_cast<size_t>(j)];
      for (size_t i = 0; i < 7; ++i) a += w1[static_cast<size_t>(j) * 7 + i] * x[i];
      h[static_cast<size_t>(j)] = std::tanh(a);
    }
    std::vector<double> z(static_cast<size_t>(classes()));
    double zmax = -1e300;
    for (int k = 0; k < classes(); ++k) {
      double a = b2[static_cast<size_t>(k)];
      for (int j = 0; j < hidden; ++j) a += w2[static_cast<size_t>(k * hidden + j)] * h[static_cast<size_t>(j)];
      z[static_cast<size_t>(k)] = a;
      zmax = std::max(zmax, a);
    }
    double denom = 0.0;
    for (double& v : z) {
      v = std::exp(v - zmax);
      denom += v;
    }
    for (double& v : z) v /= denom;
    return z;
  }

  std::vector<double> distribution(double lambda, const Pose& predicted) const {
    return distribution(TrainingSample::make(predicted, lambda, 0).features);
  }

  /// Expected hit rate under the model's output distribution.
  double expected_hit_rate(double lambda, const Pose& predicted) const {
    const auto p = distribution(lambda, predicted);
    double e = 0.0;
    for (int k = 0; k <= bins; ++k) e += p[static_cast<size_t>(k)] * (static_cast<double>(k) / bins);
    return e;
  }
};

/// Tail mass of the model's hit-rate distribution at levels >= threshold.
inline double hit_probability(const QoeModel& model, double lambda, const Pose& predicted,
                              double threshold) {
  const int kmin = static_cast<int>(std::ceil(threshold * model.bins - 1e-9));
  if (kmin <= 0) return 1.0;
  if (kmin > model.bins) return 0.0;
  const auto p = model.distribution(lambda, predicted);
  double tail = 0.0;
  for (int k = kmin; k <= model.bins; ++k) tail += p[static_cast<size_t>(k)];
  return tail;
}

namespace detail {

struct QoeWorkspace {
  std::vector<std::array<double, 7>> x;  // standardized features
  std::vector<int> y;
};

inline size_t qoe_param_count(const QoeModel& m) {
  return m.w1.size() + m.b1.size() + m.w2.size() + m.b2.size();
}

inline std::vector<double> qoe_get_params(const QoeModel& m) {
  std::vector<double> p;
  p.reserve(qoe_param_count(m));
  p.insert(p.end(), m.w1.begin(), m.w1.end());
  p.insert(p.end(), m.b1.begin(), m.b1.end());
  p.insert(p.end(), m.w2.begin(), m.w2.end());
  p.insert(p.end(), m.b2.begin(), m.b2.end());
  return p;
}

inline void qoe_set_params(QoeModel& m, std::span<const double> p) {
  size_t o = 0;
  std::copy_n(p.begin() + o, m.w1.size(), m.w1.begin());
  o += m.w1.size();
  std::copy_n(p.begin() + o, m.b1.size(), m.b1.begin());
  o += m.b1.size();
  std::copy_n(p.begin() + o, m.w2.size(), m.w2.begin());
  o += m.w2.size();
  std::copy_n(p.begin() + o, m.b2.size(), m.b2.begin());
}

// Mean cross-entropy over (pre-standardized) rows; optionally accumulates the
// analytic gradient in the qoe_get_params layout.
inline double qoe_loss_grad_std(const QoeModel& m, const QoeWorkspace& ws,
                                std::span<const size_t> idx, std::vector<double>* grad) {
  const int H = m.hidden, K = m.classes();
  if (grad != nullptr) {
    grad->assign(qoe_param_count(m), 0.0);
  }
  double loss = 0.0;
  std::vector<double> hidden_act(static_cast<size_t>(H));
  std::vector<double> probs(static_cast<size_t>(K));
  std::vector<double> dhidden(static_cast<size_t>(H));
  const size_t w1n = m.w1.size(), b1n = m.b1.size(), w2n = m.w2.size();
  for (size_t si : idx) {
    const auto& x = ws.x[si];
    const int label = ws.y[si];
    for (int j = 0; j < H; ++j) {
      double a = m.b1[static_cast<size_t>(j)];
      for (size_t i = 0; i < 7; ++i) a += m.w1[static_cast<size_t>(j) * 7 + i] * x[i];
      hidden_act[static_cast<size_t>(j)] = std::tanh(a);
    }
    double zmax = -1e300;
    for (int k = 0; k < K; ++k) {
      double a = m.b2[static_cast<size_t>(k)];
      for (int j = 0; j < H; ++j) a += m.w2[static_cast<size_t>(k * H + j)] * hidden_act[static_cast<size_t>(j)];
      probs[static_cast<size_t>(k)] = a;
      zmax = std::max(zmax, a);
    }
    double denom = 0.0;
    for (double& v : probs) {
      v = std::exp(v - zmax);
      denom += v;
    }
    for (double& v : probs) v /= denom;
    loss += -std::log(std::max(probs[static_cast<size_t>(label)], 1e-300));

    if (grad == nullptr) continue;
    std::fill(dhidden.begin(), dhidden.end(), 0.0);
    for (int k = 0; k < K; ++k) {
      const double delta = probs[static_cast<size_t>(k)] - (k == label ? 1.0 : 0.0);
      (*grad)[w1n + b1n + w2n + static_cast<size_t>(k)] += delta;  // b2
      for (int j = 0; j < H; ++j) {
        (*grad)[w1n + b1n + static_cast<size_t>(k * H + j)] += delta * hidden_act[static_cast<size_t>(j)];
        dhidden[static_cast<size_t>(j)] += delta * m.w2[static_cast<size_t>(k * H + j)];
      }
    }
    for (int j = 0; j < H; ++j) {
      const double t = hidden_act[static_cast<size_t>(j)];
      const double da = dhidden[static_cast<size_t>(j)] * (1.0 - t * t);
      (*grad)[w1n + static_cast<size_t>(j)] += da;  // b1
      for (size_t i = 0; i < 7; ++i) (*grad)[static_cast<size_t>(j) * 7 + i] += da * x[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  if (grad != nullptr)
    for (double& g : *grad) g *= inv;
  return loss * inv;
}

inline QoeWorkspace standardize(const QoeModel& m, std::span<const TrainingSample> samples) {
  QoeWorkspace ws;
  ws.x.reserve(samples.size());
  ws.y.reserve(samples.size());
  for (const TrainingSample& s : samples) {
    std::array<double, 7> x{};
    for (size_t i = 0; i < 7; ++i) x[i] = (s.features[i] - m.feat_mean[i]) / m.feat_std[i];
    ws.x.push_back(x);
    ws.y.push_back(s.label);
  }
  return ws;
}

}  // namespace detail

/// Mean cross-entropy of the model on a sample set.
inline double qoe_cross_entropy(const QoeModel& model, std::span<const TrainingSample> samples) {
  if (samples.empty()) throw DomainError("empty evaluation set");
  const auto ws = detail::standardize(model, samples);
  std::vector<size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  return detail::qoe_loss_grad_std(model, ws, idx, nullptr);
}

/// Fraction of samples whose argmax bin matches the label.
inline double qoe_accuracy(const QoeModel& model, std::span<const TrainingSample> samples) {
  if (samples.empty()) throw DomainError("empty evaluation set");
  size_t hits = 0;
  for (const TrainingSample& s : samples) {
    const auto p = model.distribution(s.features);
    const auto it = std::max_element(p.begin(), p.end());
    if (static_cast<int>(it - p.begin()) == s.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

/// Creates a model with symmetric initialization: small random hidden weights
/// and a zero output layer, so the initial distribution is uniform.
inline QoeModel make_qoe_model(int bins, int hidden, std::uint64_t seed,
                               const std::array<double, 7>& mean,
                               const std::array<double, 7>& stdev,
                               const std::string& user_id = "") {
  QoeModel m;
  m.user_id = user_id;
  m.bins = bins;
  m.hidden = hidden;
  m.feat_mean = mean;
  m.feat_std = stdev;
  m.w1.resize(static_cast<size_t>(hidden) * 7);
  m.b1.assign(static_cast<size_t>(hidden), 0.0);
  m.w2.assign(static_cast<size_t>(bins + 1) * static_cast<size_t>(hidden), 0.0);
  m.b2.assign(static_cast<size_t>(bins + 1), 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (double& w : m.w1) w = u(rng);
  return m;
}

/// Full-batch gradient descent with backtracking (accepted steps never
/// increase the training loss) and early stopping on a 20% holdout.
inline QoeModel fit_qoe(std::span<const TrainingSample> samples, int bins,
                        const QoeHyperparams& hp, const std::string& user_id = "") {
  if (samples.empty()) throw DomainError("empty training set");
  if (bins < 1) throw DomainError("bins must be >= 1");

  std::array<double, 7> mean{}, stdev{};
  for (const TrainingSample& s : samples)
    for (size_t i = 0; i < 7; ++i) mean[i] += s.features[i];
  for (size_t i = 0; i < 7; ++i) mean[i] /= static_cast<double>(samples.size());
  for (const TrainingSample& s : samples)
    for (size_t i = 0; i < 7; ++i) {
      const double d = s.features[i] - mean[i];
      stdev[i] += d * d;
    }
  for (size_t i = 0; i < 7; ++i)
    stdev[i] = std::max(std::sqrt(stdev[i] / static_cast<double>(samples.size())), 1e-8);

  QoeModel model = make_qoe_model(bins, hp.hidden, hp.seed, mean, stdev, user_id);
  const auto ws = detail::standardize(model, samples);

  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(hp.seed ^ 0x5bf0f1e2d3c4a596ULL);
  std::shuffle(order.begin(), order.end(), rng);
  size_t n_hold = samples.size() >= 5
                      ? static_cast<size_t>(hp.holdout_fraction * static_cast<double>(samples.size()))
                      : 0;
  std::vector<size_t> hold(order.begin(), order.begin() + static_cast<long>(n_hold));
  std::vector<size_t> train(order.begin() + static_cast<long>(n_hold), order.end());

  std::vector<double> params = detail::qoe_get_params(model);
  std::vector<double> grad, trial(params.size());
  double step = hp.learning_rate;
  double train_loss = detail::qoe_loss_grad_std(model, ws, train, &grad);

  double best_hold = hold.empty() ? 0.0 : detail::qoe_loss_grad_std(model, ws, hold, nullptr);
  std::vector<double> best_params = params;
  int since_best = 0;

  for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
    bool accepted = false;
    while (step > 1e-12) {
      for (size_t i = 0; i < params.size(); ++i) trial[i] = params[i] - step * grad[i];
      detail::qoe_set_params(model, trial);
      const double l = detail::qoe_loss_grad_std(model, ws, train, nullptr);
      if (l <= train_loss) {
        params = trial;
        train_loss = l;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    step = std::min(step * 1.2, hp.learning_rate * 4.0);
    detail::qoe_set_params(model, params);
    train_loss = detail::qoe_loss_grad_std(model, ws, train, &grad);

    if (!hold.empty()) {
      const double hl = detail::qoe_loss_grad_std(model, ws, hold, nullptr);
      if (hl < best_hold - 1e-9) {
        best_hold = hl;
        best_params = params;
        since_best = 0;
      } else if (++since_best >= hp.patience) {
        break;
      }
    }
  }

  detail::qoe_set_params(model, hold.empty() ? params : best_params);
  return model;
}

/// Indices of a deterministic holdout split, matching fit_qoe's internal one.
inline std::pair<std::vector<size_t>, std::vector<size_t>> qoe_split(size_t n, double fraction,
                                                                     std::uint64_t seed) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(seed ^ 0x5bf0f1e2d3c4a596ULL);
  std::shuffle(order.begin(), order.end(), rng);
  const size_t n_hold = n >= 5 ? static_cast<size_t>(fraction * static_cast<double>(n)) : 0;
  return {std::vector<size_t>(order.begin() + static_cast<long>(n_hold), order.end()),
          std::vector<size_t>(order.begin(), order.begin() + static_cast<long>(n_hold))};
}

/// One user's digital twin: predictor clone plus learned QoE model.
struct TwinBundle {
  std::string user_id;
  ClonedPredictor clone;
  QoeModel qoe;
  struct Meta {
    std::vector<double> frequencies;
    int history_frames = 30;
    int lookahead_frames = 0;
    int warmup_frames = 30;
    std::uint64_t sample_count = 0;
  } meta;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["user_id"] = user_id;
    j["clone"] = clone.to_json();
    nlohmann::json jq;
    jq["bins"] = qoe.bins;
    jq["hidden"] = qoe.hidden;
    jq["w1"] = qoe.w1;
    jq["b1"] = qoe.b1;
    jq["w2"] = qoe.w2;
    jq["b2"] = qoe.b2;
    jq["feat_mean"] = qoe.feat_mean;
    jq["feat_std"] = qoe.feat_std;
    j["qoe"] = std::move(jq);
    j["training"] = {{"frequencies", meta.frequencies},
                     {"history_frames", meta.history_frames},
                     {"lookahead_frames", meta.lookahead_frames},
                     {"warmup_frames", meta.warmup_frames},
                     {"sample_count", meta.sample_count}};
    return j;
  }

  static TwinBundle from_json(const nlohmann::json& j) {
    if (j.at("schema_version").get<int>() != 1)
      throw DataError("unsupported twin schema_version");
    TwinBundle t;
    t.user_id = j.at("user_id").get<std::string>();
    t.clone = ClonedPredictor::from_json(j.at("clone"));
    const auto& jq = j.at("qoe");
    t.qoe.user_id = t.user_id;
    t.qoe.bins = jq.at("bins").get<int>();
    t.qoe.hidden = jq.at("hidden").get<int>();
    t.qoe.w1 = jq.at("w1").get<std::vector<double>>();
    t.qoe.b1 = jq.at("b1").get<std::vector<double>>();
    t.qoe.w2 = jq.at("w2").get<std::vector<double>>();
    t.qoe.b2 = jq.at("b2").get<std::vector<double>>();
    t.qoe.feat_mean = jq.at("feat_mean").get<std::array<double, 7>>();
    t.qoe.feat_std = jq.at("feat_std").get<std::array<double, 7>>();
    const auto& jt = j.at("training");
    t.meta.frequencies = jt.at("frequencies").get<std::vector<double>>();
    t.meta.history_frames = jt.at("history_frames").get<int>();
    t.meta.lookahead_frames = jt.at("lookahead_frames").get<int>();
    t.meta.warmup_frames = jt.at("warmup_frames").get<int>();
    t.meta.sample_count = jt.at("sample_count").get<std::uint64_t>();
    return t;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write twin file: " + path);
    out << to_json().dump(2) << "\n";
  }

  static TwinBundle load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open twin file: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

/// Builds the full twin for one user: clone the deployed predictor from its
/// outputs, roll the pipeline at every swept frequency, fit the QoE model.
inline TwinBundle build_twin(const PoseTrace& trace, const PipelineConfig& cfg,
                             const std::vector<double>& frequencies, int bins,
                             const QoeHyperparams& hp) {
  TwinBundle t;
  t.user_id = trace.user_id;
  const std::vector<CloneSample> clone_samples = collect_clone_samples(trace, cfg, frequencies);
  t.clone = fit_clone(clone_samples, cfg.predictor.method);
  const std::vector<TrainingSample> samples =
      generate_training_set(trace, cfg, t.clone, frequencies, bins);
  t.qoe = fit_qoe(samples, bins, hp, trace.user_id);
  t.meta.frequencies = frequencies;
  t.meta.history_frames = cfg.predictor.history_frames;
  t.meta.lookahead_frames = cfg.predictor.lookahead_frames;
  t.meta.warmup_frames = cfg.warmup_frames;
  t.meta.sample_count = samples.size();
  return t;
}

}  // namespace marqoe
