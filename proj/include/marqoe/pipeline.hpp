#pragma once

#include <optional>
#include <vector>

#include "marqoe/common.hpp"
#include "marqoe/geometry.hpp"
#include "marqoe/prediction.hpp"
#include "marqoe/trace.hpp"

namespace marqoe {

/// Everything needed to turn (trace, upload frequency) into per-frame
/// predicted poses and hit rates.
struct PipelineConfig {
  CellGrid grid;
  FrustumParams frustum;
  bool occlusion = true;
  PredictorConfig predictor;
  int warmup_frames = 30;  // first rendered frame

  void validate() const {
    grid.validate();
    frustum.validate();
    predictor.validate();
    if (warmup_frames < 1) throw DomainError("warmup_frames must be >= 1");
  }
};

/// Frames that receive annotation rendering: everything after warmup.
inline std::vector<int> render_frames(const PoseTrace& trace, const PipelineConfig& cfg) {
  std::vector<int> out;
  for (int f = cfg.warmup_frames; f < trace.frame_count(); ++f) out.push_back(f);
  return out;
}

struct FramePrediction {
  int frame = 0;
  bool has_prediction = false;
  Pose predicted;
};

/// Predicts the pose of every rendered frame at a given upload frequency.
/// The prediction for frame f is made one lookahead W ahead of time, from
/// the uploads whose source index lies in (f-W-H, f-W]. When a clone is
/// supplied it replaces the deployed predictor.
inline std::vector<FramePrediction> predict_frames(const PoseTrace& trace,
                                                   const PipelineConfig& cfg, double lambda,
                                                   const ClonedPredictor* clone = nullptr) {
  cfg.validate();
  const SampledTrace sampled = downsample(trace, lambda);
  const int W = cfg.predictor.resolved_lookahead(sampled.stride);
  std::vector<FramePrediction> out;
  for (int f : render_frames(trace, cfg)) {
    FramePrediction fp;
    fp.frame = f;
    const int query = std::max(f - W, 0);
    const PoseHistory hist = build_history(sampled, query, cfg.predictor.history_frames);
    if (!hist.empty()) {
      fp.has_prediction = true;
      const int lookahead = f - query;
      fp.predicted = clone != nullptr ? clone->predict(hist, lookahead)
                                      : predict_pose(hist, lookahead, cfg.predictor.method);
    }
    out.push_back(fp);
  }
  return out;
}

struct FrameOutcome {
  int frame = 0;
  bool has_prediction = false;
  Pose predicted;
  std::optional<double> hit_rate;  // empty when excluded (no prediction or empty union)
};

struct PipelineRun {
  double lambda = 0.0;
  int stride = 1;
  int lookahead = 1;
  std::vector<FrameOutcome> frames;

  std::optional<double> mean_hit_rate() const {
    double sum = 0.0;
    size_t n = 0;
    for (const FrameOutcome& f : frames) {
      if (f.hit_rate) {
        sum += *f.hit_rate;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

/// Full deterministic pipeline pass: prediction plus realized hit rate for
/// every rendered frame at one upload frequency.
inline PipelineRun run_pipeline(const PoseTrace& trace, const PipelineConfig& cfg, double lambda,
                                const ClonedPredictor* clone = nullptr) {
  PipelineRun run;
  run.lambda = lambda;
  run.stride = upload_stride(trace.frame_rate, lambda);
  run.lookahead = cfg.predictor.resolved_lookahead(run.stride);
  for (const FramePrediction& fp : predict_frames(trace, cfg, lambda, clone)) {
    FrameOutcome oc;
    oc.frame = fp.frame;
    oc.has_prediction = fp.has_prediction;
    oc.predicted = fp.predicted;
    if (fp.has_prediction) {
      const VisibleSet actual =
          visible_cells(cfg.grid, trace.poses[static_cast<size_t>(fp.frame)], cfg.frustum,
                        cfg.occlusion);
      const VisibleSet predicted = visible_cells(cfg.grid, fp.predicted, cfg.frustum, cfg.occlusion);
      oc.hit_rate = vchr(actual, predicted);
    }
    run.frames.push_back(oc);
  }
  return run;
}

/// Clone training data: one sample per rendered frame and upload frequency,
/// with the deployed predictor's output as the target.
inline std::vector<CloneSample> collect_clone_samples(const PoseTrace& trace,
                                                      const PipelineConfig& cfg,
                                                      const std::vector<double>& frequencies) {
  std::vector<CloneSample> out;
  for (double lambda : frequencies) {
    const SampledTrace sampled = downsample(trace, lambda);
    const int W = cfg.predictor.resolved_lookahead(sampled.stride);
    for (int f : render_frames(trace, cfg)) {
      const int query = std::max(f - W, 0);
      const PoseHistory hist = build_history(sampled, query, cfg.predictor.history_frames);
      if (hist.empty()) continue;
      CloneSample s;
      s.target_frame = f;
      s.target = predict_pose(hist, f - query, cfg.predictor.method);
      s.history = std::move(hist);
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace marqoe
