#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "marqoe/allocator.hpp"
#include "marqoe/channel.hpp"
#include "marqoe/common.hpp"
#include "marqoe/geometry.hpp"
#include "marqoe/pipeline.hpp"
#include "marqoe/trace.hpp"

// Validation oracles. Numerical routines here (normal CDF, queue, Jaccard)
// are deliberately separate implementations from the library code they check.
namespace marqoe::oracle {

/// Standard normal CDF via the series
/// Phi(x) = 1/2 + phi(x) * (x + x^3/3 + x^5/(3*5) + ...),
/// accurate to ~1e-14 for |x| <= 8.
inline double normal_cdf(double x) {
  if (x < -8.5) return 0.0;
  if (x > 8.5) return 1.0;
  double term = x;
  double sum = x;
  for (int k = 1; k < 400; ++k) {
    term *= x * x / (2.0 * k + 1.0);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return 0.5 + sum * std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

/// Independent Jaccard over raw index vectors (hash-set based).
inline double jaccard(const std::vector<int>& a, const std::vector<int>& b) {
  std::unordered_set<int> sa(a.begin(), a.end());
  std::unordered_set<int> sb(b.begin(), b.end());
  size_t inter = 0;
  for (int v : sa)
    if (sb.count(v) > 0) ++inter;
  const size_t uni = sa.size() + sb.size() - inter;
  if (uni == 0) throw DomainError("jaccard of two empty sets");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct OracleReport {
  std::string name;
  std::uint64_t size = 0;  // sample count or DP size
  double reference = 0.0;
  double approximate = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;

  static const char* csv_header() {
    return "oracle,size,reference,approximate,abs_error,rel_error,tolerance,pass";
  }
};

inline OracleReport make_report(std::string name, std::uint64_t size, double reference,
                                double approximate, double tolerance) {
  OracleReport r;
  r.name = std::move(name);
  r.size = size;
  r.reference = reference;
  r.approximate = approximate;
  r.abs_error = std::abs(approximate - reference);
  r.rel_error = reference != 0.0 ? r.abs_error / std::abs(reference) : r.abs_error;
  r.tolerance = tolerance;
  r.pass = r.abs_error <= tolerance || r.rel_error <= tolerance;
  return r;
}

using ServiceSampler = std::function<double(std::mt19937_64&)>;

struct QueueSimResult {
  double mean_wait = 0.0;
  double mean_sojourn = 0.0;
  std::uint64_t measured = 0;
};

/// Discrete-event single-server queue with strictly periodic arrivals
/// (period 1/lambda) and i.i.d. service from the sampler. The first 10% of
/// arrivals are treated as warmup and excluded from the averages.
inline QueueSimResult simulate_dg1(double lambda, const ServiceSampler& sample_service,
                                   std::uint64_t n_arrivals, std::uint64_t seed) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be > 0");
  if (n_arrivals < 10000) throw DomainError("need at least 1e4 arrivals");
  std::mt19937_64 rng(seed);
  const double period = 1.0 / lambda;

  double prev_completion = 0.0;
  double service_sum = 0.0;
  double wait_sum = 0.0, sojourn_sum = 0.0;
  const std::uint64_t warmup = n_arrivals / 10;
  std::uint64_t measured = 0;
  for (std::uint64_t i = 0; i < n_arrivals; ++i) {
    const double arrival = static_cast<double>(i) * period;
    const double start = std::max(arrival, prev_completion);
    const double service = sample_service(rng);
    if (!(service >= 0.0)) throw DomainError("service sampler returned a negative value");
    prev_completion = start + service;
    service_sum += service;
    if (i >= warmup) {
      wait_sum += start - arrival;
      sojourn_sum += prev_completion - arrival;
      ++measured;
    }
  }
  const double util = lambda * service_sum / static_cast<double>(n_arrivals);
  if (util >= 1.0)
    throw InstabilityError("simulated utilization " + std::to_string(util) + " is unstable");
  QueueSimResult r;
  r.measured = measured;
  r.mean_wait = wait_sum / static_cast<double>(measured);
  r.mean_sojourn = sojourn_sum / static_cast<double>(measured);
  return r;
}

/// Exact tail versus its normal approximation on one instance.
inline OracleReport compare_clt(std::span<const double> p_hats, double rho,
                                double tolerance = 0.05) {
  const double exact = exact_tail_oracle(p_hats, rho);
  const auto lhs = clt_constraint_lhs(p_hats, rho);
  double approx;
  if (lhs.has_value()) {
    approx = 1.0 - normal_cdf(*lhs);
  } else {
    size_t certain = 0;
    for (double p : p_hats)
      if (p == 1.0) ++certain;
    approx = static_cast<double>(certain) >=
                     static_cast<double>(p_hats.size()) * rho - 1e-9
                 ? 1.0
                 : 0.0;
  }
  OracleReport r = make_report("clt", p_hats.size(), exact, approx, tolerance);
  r.pass = r.abs_error <= tolerance;  // absolute band only for tail probabilities
  return r;
}

struct ReplayReport {
  bool lambda_feasible = false;
  double lambda = 0.0;
  std::uint64_t replays = 0;
  std::uint64_t successes = 0;
  double empirical = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (k + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// 95% Wilson interval.
inline std::pair<double, double> wilson_ci(std::uint64_t successes, std::uint64_t n) {
  if (n == 0) return {0.0, 1.0};
  const double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(successes) / nn;
  const double denom = 1.0 + z * z / nn;
  const double center = (phat + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z * z / (4.0 * nn * nn)) / denom;
  const double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
  const double hi = successes == n ? 1.0 : std::min(1.0, center + half);
  return {lo, hi};
}

}  // namespace detail

/// Monte Carlo ground truth for the reliability constraint at spectrum b:
/// each replay draws per-upload SNRs, pushes the uploads through the queue,
/// and rebuilds every frame's prediction from the poses that had actually
/// arrived by its preparation deadline (one lookahead before the frame, plus
/// the latency budget). Success means the fraction of frames with hit rate
/// >= the threshold reaches rho.
inline ReplayReport replay_constraint(const PoseTrace& trace, const ChannelModel& channel,
                                      double b, const QoeRequirement& req,
                                      const PipelineConfig& cfg, double max_latency_s,
                                      int max_stride, std::uint64_t n_replays,
                                      std::uint64_t seed) {
  if (n_replays < 1000) throw DomainError("need at least 1e3 replays");
  req.validate();
  cfg.validate();

  ReplayReport report;
  report.replays = n_replays;
  const auto lambda =
      max_upload_frequency(channel, b, max_latency_s, trace.frame_rate, max_stride);
  if (!lambda.has_value()) {
    auto [lo, hi] = detail::wilson_ci(0, n_replays);
    report.ci_low = lo;
    report.ci_high = hi;
    return report;
  }
  report.lambda_feasible = true;
  report.lambda = *lambda;

  const SampledTrace sampled = downsample(trace, *lambda);
  const int W = cfg.predictor.resolved_lookahead(sampled.stride);
  const int H = cfg.predictor.history_frames;
  const std::vector<int> frames = render_frames(trace, cfg);
  const double fr = trace.frame_rate;

  // Actual visible sets are replay-invariant.
  std::vector<VisibleSet> actual_sets(frames.size());
  for (size_t i = 0; i < frames.size(); ++i)
    actual_sets[i] = visible_cells(cfg.grid, trace.poses[static_cast<size_t>(frames[i])],
                                   cfg.frustum, cfg.occlusion);

  const size_t n_uploads = sampled.selected_indices.size();
  std::vector<double> completion(n_uploads);
  std::uint64_t successes = 0;

  for (std::uint64_t r = 0; r < n_replays; ++r) {
    std::mt19937_64 rng(detail::mix_seed(seed, r));
    double prev = 0.0;
    for (size_t i = 0; i < n_uploads; ++i) {
      const double arrival = static_cast<double>(sampled.selected_indices[i]) / fr;
      const double service = channel.alpha_bits / rate(b, channel.sample_snr(rng));
      prev = std::max(arrival, prev) + service;
      completion[i] = prev;
    }

    size_t defined = 0, hits = 0;
    for (size_t fi = 0; fi < frames.size(); ++fi) {
      const int f = frames[fi];
      const int query = std::max(f - W, 0);
      const double deadline = static_cast<double>(query) / fr + max_latency_s;
      PoseHistory hist;
      hist.query_frame = query;
      for (size_t i = 0; i < n_uploads; ++i) {
        const int k = sampled.selected_indices[i];
        if (k > query) break;
        if (k > query - H && completion[i] <= deadline)
          hist.entries.emplace_back(k, sampled.pose_at(k));
      }
      if (hist.empty()) continue;
      const Pose predicted = predict_pose(hist, f - query, cfg.predictor.method);
      const VisibleSet pred_set = visible_cells(cfg.grid, predicted, cfg.frustum, cfg.occlusion);
      if (actual_sets[fi].empty() && pred_set.empty()) continue;
      ++defined;
      if (jaccard(actual_sets[fi].cells, pred_set.cells) >= req.vchr_threshold - 1e-12) ++hits;
    }
    if (defined > 0 &&
        static_cast<double>(hits) >= static_cast<double>(defined) * req.rho - 1e-9)
      ++successes;
  }

  report.successes = successes;
  report.empirical = static_cast<double>(successes) / static_cast<double>(n_replays);
  auto [lo, hi] = detail::wilson_ci(successes, n_replays);
  report.ci_low = lo;
  report.ci_high = hi;
  return report;
}

}  // namespace marqoe::oracle
