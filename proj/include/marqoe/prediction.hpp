#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "marqoe/common.hpp"
#include "marqoe/trace.hpp"

namespace marqoe {

enum class PredictMethod { LinearRegression, Persistence };

inline std::string to_string(PredictMethod m) {
  return m == PredictMethod::LinearRegression ? "linear_regression" : "persistence";
}

inline PredictMethod predict_method_from_string(const std::string& s) {
  if (s == "linear_regression") return PredictMethod::LinearRegression;
  if (s == "persistence") return PredictMethod::Persistence;
  throw DomainError("unknown predictor method: " + s);
}

struct PredictorConfig {
  int history_frames = 30;    // H
  int lookahead_frames = 0;   // W; 0 means "one upload stride"
  PredictMethod method = PredictMethod::LinearRegression;

  void validate() const {
    if (history_frames < 2) throw DomainError("history_frames must be >= 2");
    if (lookahead_frames < 0) throw DomainError("lookahead_frames must be >= 0");
  }

  int resolved_lookahead(int stride) const {
    return lookahead_frames > 0 ? lookahead_frames : stride;
  }
};

/// Uploaded poses with source frame index in (query_frame - H, query_frame].
struct PoseHistory {
  std::vector<std::pair<int, Pose>> entries;  // ascending frame index
  int query_frame = 0;

  bool empty() const { return entries.empty(); }
  size_t size() const { return entries.size(); }
  const std::pair<int, Pose>& newest() const { return entries.back(); }
};

inline PoseHistory build_history(const SampledTrace& sampled, int frame, int history_frames) {
  if (frame < 0 || frame >= sampled.source.frame_count())
    throw DomainError("history query frame outside trace");
  PoseHistory h;
  h.query_frame = frame;
  for (int k : sampled.selected_indices) {
    if (k > frame) break;
    if (k > frame - history_frames) h.entries.emplace_back(k, sampled.pose_at(k));
  }
  return h;
}

namespace detail {

// Unwraps an angle sequence so consecutive values differ by < 180 degrees.
inline std::vector<double> unwrap_deg(std::span<const double> vals) {
  std::vector<double> out(vals.size());
  if (vals.empty()) return out;
  out[0] = vals[0];
  for (size_t i = 1; i < vals.size(); ++i)
    out[i] = out[i - 1] + angle_delta_deg(vals[i], vals[i - 1]);
  return out;
}

// Ordinary least squares y = a + b*x evaluated at x_eval. With one point the
// line degenerates to that value.
inline double ols_extrapolate(std::span<const double> xs, std::span<const double> ys,
                              double x_eval) {
  const size_t n = xs.size();
  if (n == 1) return ys[0];
  double xm = 0.0, ym = 0.0;
  for (size_t i = 0; i < n; ++i) {
    xm += xs[i];
    ym += ys[i];
  }
  xm /= static_cast<double>(n);
  ym /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - xm) * (xs[i] - xm);
    sxy += (xs[i] - xm) * (ys[i] - ym);
  }
  if (sxx == 0.0) return ym;
  const double slope = sxy / sxx;
  return ym + slope * (x_eval - xm);
}

// Gaussian elimination with partial pivoting; returns false on singularity.
inline bool solve_linear(std::vector<std::vector<double>>& a, std::vector<double>& b) {
  const size_t n = a.size();
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-300) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a[r][col] / a[col][col];
      if (factor == 0.0) continue;
      for (size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
      b[r] -= factor * b[col];
    }
  }
  for (size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return true;
}

// Least squares via normal equations; falls back to a tiny ridge term when
// the system is singular (degenerate training data).
inline std::vector<double> least_squares(const std::vector<std::vector<double>>& rows,
                                         const std::vector<double>& targets) {
  const size_t n = rows.size();
  const size_t m = rows.empty() ? 0 : rows[0].size();
  std::vector<std::vector<double>> ata(m, std::vector<double>(m, 0.0));
  std::vector<double> atb(m, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < m; ++j) {
      atb[j] += rows[i][j] * targets[i];
      for (size_t k = j; k < m; ++k) ata[j][k] += rows[i][j] * rows[i][k];
    }
  }
  for (size_t j = 0; j < m; ++j)
    for (size_t k = 0; k < j; ++k) ata[j][k] = ata[k][j];

  auto a = ata;
  auto b = atb;
  if (solve_linear(a, b)) return b;

  double diag = 0.0;
  for (size_t j = 0; j < m; ++j) diag += ata[j][j];
  const double ridge = std::max(1e-12, 1e-12 * diag / static_cast<double>(m));
  a = ata;
  b = atb;
  for (size_t j = 0; j < m; ++j) a[j][j] += ridge;
  solve_linear(a, b);
  return b;
}

}  // namespace detail

/// Extrapolates each pose component independently to frame
/// query_frame + lookahead. Linear regression falls back to persistence when
/// the history holds fewer than two entries; angles are unwrapped before the
/// fit and renormalized after.
inline Pose predict_pose(const PoseHistory& history, int lookahead, PredictMethod method) {
  if (history.empty()) throw DomainError("cannot predict from empty history");
  if (lookahead < 1) throw DomainError("lookahead must be >= 1");
  if (method == PredictMethod::Persistence || history.size() < 2)
    return history.newest().second;

  const size_t n = history.size();
  std::vector<double> xs(n);
  for (size_t i = 0; i < n; ++i) xs[i] = static_cast<double>(history.entries[i].first);
  const double x_eval = static_cast<double>(history.query_frame + lookahead);

  Pose out;
  std::vector<double> ys(n);
  for (int c = 0; c < 6; ++c) {
    for (size_t i = 0; i < n; ++i) ys[i] = history.entries[i].second.component(c);
    if (Pose::is_angle_component(c)) {
      const auto unwrapped = detail::unwrap_deg(ys);
      out.set_component(c, normalize_angle_deg(detail::ols_extrapolate(xs, unwrapped, x_eval)));
    } else {
      out.set_component(c, detail::ols_extrapolate(xs, ys, x_eval));
    }
  }
  return out;
}

/// Network-side replica of the deployed pose predictor. For the linear-
/// regression method it learns, per input pattern (relative frame offsets of
/// the history window plus extrapolation horizon), one affine map per pose
/// component from window values to the predicted value. Patterns never seen
/// during fitting fall back to persistence.
struct ClonedPredictor {
  struct Group {
    std::vector<int> offsets;  // entry frame minus newest entry frame (<= 0)
    int horizon = 1;           // target frame minus newest entry frame
    std::array<std::vector<double>, 6> coef;  // per component: intercept, then one weight per entry
  };

  PredictMethod method = PredictMethod::LinearRegression;
  std::vector<Group> groups;

  static std::pair<std::vector<int>, int> pattern_key(const PoseHistory& h, int lookahead) {
    const int newest = h.newest().first;
    std::vector<int> offsets(h.size());
    for (size_t i = 0; i < h.size(); ++i) offsets[i] = h.entries[i].first - newest;
    return {std::move(offsets), h.query_frame + lookahead - newest};
  }

  const Group* find_group(const std::vector<int>& offsets, int horizon) const {
    for (const Group& g : groups)
      if (g.horizon == horizon && g.offsets == offsets) return &g;
    return nullptr;
  }

  Pose predict(const PoseHistory& history, int lookahead) const {
    if (history.empty()) throw DomainError("cannot predict from empty history");
    if (method == PredictMethod::Persistence) return history.newest().second;
    auto [offsets, horizon] = pattern_key(history, lookahead);
    const Group* g = find_group(offsets, horizon);
    if (g == nullptr) return history.newest().second;

    const size_t n = history.size();
    Pose out;
    std::vector<double> ys(n);
    for (int c = 0; c < 6; ++c) {
      for (size_t i = 0; i < n; ++i) ys[i] = history.entries[i].second.component(c);
      std::vector<double> vals;
      if (Pose::is_angle_component(c))
        vals = detail::unwrap_deg(ys);
      else
        vals.assign(ys.begin(), ys.end());
      double v = g->coef[c][0];
      for (size_t i = 0; i < n; ++i) v += g->coef[c][i + 1] * vals[i];
      out.set_component(c, Pose::is_angle_component(c) ? normalize_angle_deg(v) : v);
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["method"] = to_string(method);
    j["groups"] = nlohmann::json::array();
    for (const Group& g : groups) {
      nlohmann::json jg;
      jg["offsets"] = g.offsets;
      jg["horizon"] = g.horizon;
      for (int c = 0; c < 6; ++c) jg["coef"].push_back(g.coef[c]);
      j["groups"].push_back(std::move(jg));
    }
    return j;
  }

  static ClonedPredictor from_json(const nlohmann::json& j) {
    ClonedPredictor cp;
    cp.method = predict_method_from_string(j.at("method").get<std::string>());
    for (const auto& jg : j.at("groups")) {
      Group g;
      g.offsets = jg.at("offsets").get<std::vector<int>>();
      g.horizon = jg.at("horizon").get<int>();
      for (int c = 0; c < 6; ++c) g.coef[c] = jg.at("coef")[c].get<std::vector<double>>();
      cp.groups.push_back(std::move(g));
    }
    return cp;
  }
};

/// One clone training pair: an input window, the frame the deployed
/// predictor aimed at, and its output pose for that frame.
struct CloneSample {
  PoseHistory history;
  int target_frame = 0;
  Pose target;

  int lookahead() const { return target_frame - history.query_frame; }
};

/// Fits the clone by least squares per pattern group and pose component,
/// minimizing the mean squared gap to the deployed predictor's outputs.
inline ClonedPredictor fit_clone(std::span<const CloneSample> samples, PredictMethod method) {
  if (samples.empty()) throw DomainError("clone training set is empty");
  ClonedPredictor cp;
  cp.method = method;
  if (method == PredictMethod::Persistence) return cp;

  std::vector<std::pair<ClonedPredictor::Group, std::vector<const CloneSample*>>> buckets;
  for (const CloneSample& s : samples) {
    if (s.history.empty()) throw DomainError("clone training pair with empty history");
    auto [offsets, horizon] = ClonedPredictor::pattern_key(s.history, s.lookahead());
    bool found = false;
    for (auto& [g, members] : buckets) {
      if (g.horizon == horizon && g.offsets == offsets) {
        members.push_back(&s);
        found = true;
        break;
      }
    }
    if (!found) {
      ClonedPredictor::Group g;
      g.offsets = std::move(offsets);
      g.horizon = horizon;
      buckets.emplace_back(std::move(g), std::vector<const CloneSample*>{&s});
    }
  }

  for (auto& [g, members] : buckets) {
    const size_t width = g.offsets.size();
    std::vector<double> ys(width);
    for (int c = 0; c < 6; ++c) {
      std::vector<std::vector<double>> rows;
      std::vector<double> targets;
      rows.reserve(members.size());
      for (const CloneSample* s : members) {
        for (size_t i = 0; i < width; ++i) ys[i] = s->history.entries[i].second.component(c);
        std::vector<double> vals;
        if (Pose::is_angle_component(c))
          vals = detail::unwrap_deg(ys);
        else
          vals.assign(ys.begin(), ys.end());
        std::vector<double> row(width + 1, 1.0);
        for (size_t i = 0; i < width; ++i) row[i + 1] = vals[i];
        rows.push_back(std::move(row));
        double t = s->target.component(c);
        if (Pose::is_angle_component(c)) t = vals.back() + angle_delta_deg(t, ys.back());
        targets.push_back(t);
      }
      g.coef[c] = detail::least_squares(rows, targets);
    }
    cp.groups.push_back(std::move(g));
  }
  return cp;
}

/// Mean squared prediction gap between the clone and the recorded targets;
/// angle residuals are wrapped to [-180, 180).
inline double clone_loss(const ClonedPredictor& clone, std::span<const CloneSample> samples) {
  if (samples.empty()) throw DomainError("clone training set is empty");
  double total = 0.0;
  for (const CloneSample& s : samples) {
    const Pose pred = clone.predict(s.history, s.lookahead());
    for (int c = 0; c < 6; ++c) {
      double d = pred.component(c) - s.target.component(c);
      if (Pose::is_angle_component(c)) d = angle_delta_deg(pred.component(c), s.target.component(c));
      total += d * d;
    }
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace marqoe
