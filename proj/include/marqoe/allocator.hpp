#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marqoe/channel.hpp"
#include "marqoe/common.hpp"
#include "marqoe/dtwin.hpp"
#include "marqoe/pipeline.hpp"

namespace marqoe {

namespace detail {

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

}  // namespace detail

/// Inverse standard normal CDF: rational initial guess refined by one Newton
/// step; absolute error well below 1e-6 across (0, 1).
inline double inverse_normal_cdf(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw DomainError("inverse_normal_cdf requires p in (0, 1)");

  // Acklam's rational approximation.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  const double err = detail::std_normal_cdf(x) - p;
  const double pdf = detail::std_normal_pdf(x);
  if (pdf > 0.0) x -= err / pdf;
  return x;
}

/// Standardized deficit (N*rho - sum p) / sqrt(sum p(1-p)); empty when every
/// probability is exactly 0 or 1 (zero variance, constraint decided exactly).
inline std::optional<double> clt_constraint_lhs(std::span<const double> p_hats, double rho) {
  if (p_hats.empty()) throw DomainError("empty probability list");
  double sum = 0.0, var = 0.0;
  for (double p : p_hats) {
    if (!(p >= 0.0) || !(p <= 1.0)) throw DomainError("probability outside [0, 1]");
    sum += p;
    var += p * (1.0 - p);
  }
  if (var == 0.0) return std::nullopt;
  const double n = static_cast<double>(p_hats.size());
  return (n * rho - sum) / std::sqrt(var);
}

struct QoeRequirement {
  double vchr_threshold = 0.6;  // V_u
  double rho = 0.9;
  double epsilon = 0.9;

  void validate() const {
    if (!(vchr_threshold >= 0.0) || !(vchr_threshold <= 1.0))
      throw DomainError("vchr_threshold must be in [0, 1]");
    if (!(rho > 0.0) || !(rho <= 1.0)) throw DomainError("rho must be in (0, 1]");
    if (!(epsilon > 0.0) || !(epsilon < 1.0)) throw DomainError("epsilon must be in (0, 1)");
  }
};

/// Reliability test on the estimated per-frame success probabilities. Zero
/// variance falls back to counting certain successes against N*rho.
inline bool qoe_constraint_satisfied(std::span<const double> p_hats, double rho, double epsilon) {
  const auto lhs = clt_constraint_lhs(p_hats, rho);
  if (!lhs.has_value()) {
    size_t certain = 0;
    for (double p : p_hats)
      if (p == 1.0) ++certain;
    return static_cast<double>(certain) >=
           static_cast<double>(p_hats.size()) * rho - 1e-9;
  }
  // Slack keeps the exact boundary case (all p equal to rho, epsilon 0.5)
  // from flipping on summation rounding.
  return *lhs <= inverse_normal_cdf(1.0 - epsilon) + 1e-9;
}

/// Exact P(S >= ceil(N*rho)) for S a sum of independent Bernoulli(p_i),
/// by the standard O(N^2) convolution.
inline double exact_tail_oracle(std::span<const double> p_hats, double rho) {
  const size_t n = p_hats.size();
  if (n == 0) throw DomainError("empty probability list");
  const int m = static_cast<int>(std::ceil(static_cast<double>(n) * rho - 1e-9));
  if (m <= 0) return 1.0;
  if (m > static_cast<int>(n)) return 0.0;
  std::vector<double> dp(n + 1, 0.0);
  dp[0] = 1.0;
  for (size_t i = 0; i < n; ++i) {
    const double p = p_hats[i];
    for (size_t k = i + 1; k >= 1; --k) dp[k] = dp[k] * (1.0 - p) + dp[k - 1] * p;
    dp[0] *= (1.0 - p);
  }
  double tail = 0.0;
  for (size_t k = static_cast<size_t>(m); k <= n; ++k) tail += dp[k];
  return std::min(tail, 1.0);
}

struct SweepParams {
  double b_min = 1e5;
  double b_max = 2e7;
  double delta = 1e5;
  int max_stride = 30;

  void validate() const {
    if (!(b_min > 0.0) || !(b_max >= b_min)) throw DomainError("need 0 < b_min <= b_max");
    if (!(delta > 0.0)) throw DomainError("sweep delta must be > 0");
    if (max_stride < 1) throw DomainError("max_stride must be >= 1");
  }
};

struct SweepPoint {
  double b = 0.0;
  bool lambda_feasible = false;
  double lambda = 0.0;
  bool degenerate = false;
  double lhs = 0.0;
  bool satisfied = false;
};

struct AllocationResult {
  std::string user_id;
  bool feasible = false;
  double b_star = 0.0;
  double lambda_star = 0.0;
  std::vector<double> p_hats;
  bool degenerate = false;
  double lhs = 0.0;
  double phi_inv = 0.0;
  std::vector<SweepPoint> trail;
};

/// Minimum-spectrum sweep for one device: walk b upward in steps of delta,
/// map each b to its best feasible upload frequency, query the twin for
/// per-frame success probabilities, and stop at the first b whose
/// reliability test passes.
inline AllocationResult qoe_csp(const PoseTrace& trace, const TwinBundle& twin,
                                const ChannelModel& channel, const QoeRequirement& req,
                                const SweepParams& sweep, double max_latency_s,
                                const PipelineConfig& cfg) {
  req.validate();
  sweep.validate();
  cfg.validate();
  if (render_frames(trace, cfg).empty())
    throw DomainError("no rendered frames: trace shorter than warmup");

  AllocationResult res;
  res.user_id = trace.user_id;
  res.phi_inv = inverse_normal_cdf(1.0 - req.epsilon);

  double cached_lambda = -1.0;
  std::vector<double> cached_p;
  bool cached_ok = false;
  std::optional<double> cached_lhs;

  const long n_steps = static_cast<long>(std::floor((sweep.b_max - sweep.b_min) / sweep.delta + 1e-9));
  for (long k = 0; k <= n_steps; ++k) {
    const double b = sweep.b_min + static_cast<double>(k) * sweep.delta;
    SweepPoint pt;
    pt.b = b;
    const auto lambda = max_upload_frequency(channel, b, max_latency_s, trace.frame_rate,
                                             sweep.max_stride);
    if (!lambda.has_value()) {
      res.trail.push_back(pt);
      continue;
    }
    pt.lambda_feasible = true;
    pt.lambda = *lambda;

    if (*lambda != cached_lambda) {
      cached_lambda = *lambda;
      cached_p.clear();
      for (const FramePrediction& fp : predict_frames(trace, cfg, *lambda, &twin.clone)) {
        if (!fp.has_prediction) continue;
        cached_p.push_back(hit_probability(twin.qoe, *lambda, fp.predicted, req.vchr_threshold));
      }
      if (cached_p.empty()) throw DomainError("no frame produced a success probability");
      cached_lhs = clt_constraint_lhs(cached_p, req.rho);
      cached_ok = qoe_constraint_satisfied(cached_p, req.rho, req.epsilon);
    }

    pt.degenerate = !cached_lhs.has_value();
    pt.lhs = cached_lhs.value_or(0.0);
    pt.satisfied = cached_ok;
    res.trail.push_back(pt);

    if (cached_ok) {
      res.feasible = true;
      res.b_star = b;
      res.lambda_star = *lambda;
      res.p_hats = cached_p;
      res.degenerate = pt.degenerate;
      res.lhs = pt.lhs;
      return res;
    }
  }
  return res;
}

struct AllocationTask {
  const PoseTrace* trace = nullptr;
  const TwinBundle* twin = nullptr;
  QoeRequirement requirement;
};

struct AllocationSummary {
  std::vector<AllocationResult> results;
  double total_spectrum = 0.0;  // sum of b* over feasible users
  bool all_feasible = true;
};

/// Independent per-user sweeps; one infeasible user does not abort the rest.
inline AllocationSummary allocate_all(std::span<const AllocationTask> tasks,
                                      const ChannelModel& channel, const SweepParams& sweep,
                                      double max_latency_s, const PipelineConfig& cfg) {
  AllocationSummary summary;
  for (const AllocationTask& task : tasks) {
    AllocationResult r =
        qoe_csp(*task.trace, *task.twin, channel, task.requirement, sweep, max_latency_s, cfg);
    if (r.feasible)
      summary.total_spectrum += r.b_star;
    else
      summary.all_feasible = false;
    summary.results.push_back(std::move(r));
  }
  return summary;
}

}  // namespace marqoe
