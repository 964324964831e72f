#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "marqoe/geometry.hpp"
#include "marqoe/pipeline.hpp"
#include "marqoe/trace.hpp"

namespace testsup {

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("marqoe_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

// Content box ~2m in front of the world origin; default 4x4x2 cells.
inline marqoe::CellGrid default_grid() {
  marqoe::CellGrid g;
  g.origin = {1.5, -0.5, 0.2};
  g.extent = {1.0, 1.0, 1.8};
  g.divisions = {4, 4, 2};
  return g;
}

inline marqoe::PipelineConfig default_pipeline() {
  marqoe::PipelineConfig cfg;
  cfg.grid = default_grid();
  cfg.frustum = {};
  cfg.occlusion = true;
  cfg.predictor = {};
  cfg.warmup_frames = 30;
  return cfg;
}

inline marqoe::PoseTrace constant_trace(int frames = 300, double fr = 30.0,
                                        const std::string& id = "const") {
  marqoe::PoseTrace t;
  t.user_id = id;
  t.frame_rate = fr;
  marqoe::Pose p;
  p.tz = 1.6;  // head height, looking along +x toward the grid
  t.poses.assign(static_cast<size_t>(frames), p);
  return t;
}

struct WalkerParams {
  double yaw_amp_deg = 50.0;
  double yaw_period_s = 10.0;
  double walk_amp_m = 0.3;
  double pitch_amp_deg = 8.0;
  double noise = 0.01;
  unsigned seed = 3;
};

// Smooth human-like motion near the origin, facing the content box: swaying
// position, slow sinusoidal yaw with a small random-walk component.
inline marqoe::PoseTrace walker_trace(const WalkerParams& wp = {}, int frames = 300,
                                      double fr = 30.0, const std::string& id = "walker") {
  marqoe::PoseTrace t;
  t.user_id = id;
  t.frame_rate = fr;
  std::mt19937 rng(wp.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double wx = 0.0, wy = 0.0, wyaw = 0.0;
  for (int f = 0; f < frames; ++f) {
    const double s = static_cast<double>(f) / fr;
    wx += wp.noise * gauss(rng) / fr;
    wy += wp.noise * gauss(rng) / fr;
    wyaw += 1.5 * gauss(rng) / fr;
    marqoe::Pose p;
    p.tx = wp.walk_amp_m * std::sin(2.0 * marqoe::kPi * s / 8.0) + wx;
    p.ty = wp.walk_amp_m * std::sin(2.0 * marqoe::kPi * s / 11.0 + 1.0) + wy;
    p.tz = 1.6 + 0.02 * std::sin(2.0 * marqoe::kPi * s / 5.0);
    p.theta_x = wp.yaw_amp_deg * std::sin(2.0 * marqoe::kPi * s / wp.yaw_period_s) + wyaw;
    p.theta_y = -5.0 + wp.pitch_amp_deg * std::sin(2.0 * marqoe::kPi * s / 7.0);
    p.theta_z = 0.0;
    t.poses.push_back(p.normalized());
  }
  return t;
}

// Strictly linear motion in position with constant yaw rate: the linear
// predictor is exact on it.
inline marqoe::PoseTrace linear_trace(int frames = 300, double fr = 30.0,
                                      const std::string& id = "linear") {
  marqoe::PoseTrace t;
  t.user_id = id;
  t.frame_rate = fr;
  for (int f = 0; f < frames; ++f) {
    marqoe::Pose p;
    p.tx = 0.001 * f;
    p.ty = -0.0005 * f;
    p.tz = 1.6 + 0.0002 * f;
    p.theta_x = 0.05 * f;
    p.theta_y = -5.0 + 0.01 * f;
    p.theta_z = 0.02 * f;
    t.poses.push_back(p.normalized());
  }
  return t;
}

}  // namespace testsup
