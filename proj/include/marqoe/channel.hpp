#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>

#include "marqoe/common.hpp"

namespace marqoe {

enum class SnrModel { Constant, Exponential };

inline std::string to_string(SnrModel m) {
  return m == SnrModel::Constant ? "constant" : "exponential";
}

inline SnrModel snr_model_from_string(const std::string& s) {
  if (s == "constant") return SnrModel::Constant;
  if (s == "exponential") return SnrModel::Exponential;
  throw DomainError("unknown snr model: " + s);
}

/// Uplink channel: per-frame SNR draw (constant, or exponential with the
/// density truncated below gamma_min and renormalized) and a fixed upload
/// volume per frame.
struct ChannelModel {
  SnrModel snr_model = SnrModel::Exponential;
  double gamma_bar = 10.0;   // mean SNR (linear)
  double gamma_min = 0.1;    // truncation; ignored for constant SNR
  double alpha_bits = 1e5;   // bits uploaded per selected frame

  void validate() const {
    if (!(gamma_bar > 0.0)) throw DomainError("gamma_bar must be > 0");
    if (!(alpha_bits > 0.0)) throw DomainError("alpha_bits must be > 0");
    if (snr_model == SnrModel::Exponential && !(gamma_min > 0.0))
      throw DomainError(
          "exponential SNR needs gamma_min > 0 (second service moment diverges without "
          "truncation)");
  }

  double sample_snr(std::mt19937_64& rng) const {
    if (snr_model == SnrModel::Constant) return gamma_bar;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return gamma_min - gamma_bar * std::log1p(-u(rng));
  }
};

/// Shannon-style uplink rate in bits/s, b in Hz, log base 2.
inline double rate(double b, double gamma) {
  if (!(b > 0.0) || !(gamma > 0.0)) throw DomainError("rate requires b > 0 and gamma > 0");
  return b * std::log2(1.0 + gamma);
}

struct ServiceMoments {
  double mean = 0.0;    // E[S], seconds
  double second = 0.0;  // E[S^2], seconds^2
};

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, m, fa, flm, fm);
  const double right = simpson(f, m, b, fm, frm, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = simpson(f, a, b, fa, fm, fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace detail

/// Per-frame upload duration moments. Constant SNR gives a deterministic
/// service time; exponential SNR integrates against the truncated density
/// with relative quadrature error well under 1e-6.
inline ServiceMoments service_moments(const ChannelModel& model, double b) {
  model.validate();
  if (!(b > 0.0)) throw DomainError("spectrum b must be > 0");
  if (model.snr_model == SnrModel::Constant) {
    const double s = model.alpha_bits / rate(b, model.gamma_bar);
    return {s, s * s};
  }
  // gamma = gamma_min - gamma_bar*log(1-t) maps t in [0,1) to the truncated
  // support and absorbs the exponential weight into a uniform one.
  const auto service = [&](double gamma) { return model.alpha_bits / rate(b, gamma); };
  const auto mean_f = [&](double t) { return service(model.gamma_min - model.gamma_bar * std::log1p(-t)); };
  const auto second_f = [&](double t) {
    const double s = service(model.gamma_min - model.gamma_bar * std::log1p(-t));
    return s * s;
  };
  // Stop just shy of t=1; the remaining tail has mass ~1e-14 and a bounded
  // integrand (service -> 0 as gamma grows). The integrand peaks at t=0
  // (service is decreasing in gamma), which anchors the tolerance scale.
  const double t_hi = 1.0 - 1e-14;
  ServiceMoments m;
  m.mean = detail::adaptive_simpson(mean_f, 0.0, t_hi, 1e-10 * mean_f(0.0));
  m.second = detail::adaptive_simpson(second_f, 0.0, t_hi, 1e-10 * second_f(0.0));
  return m;
}

/// Mean latency from frame selection to upload completion under periodic
/// selection: lambda * E[S^2] / (2 (1 - lambda E[S])).
inline double queue_latency(double lambda, const ServiceMoments& m) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be > 0");
  const double util = lambda * m.mean;
  if (util >= 1.0)
    throw InstabilityError("queue unstable: lambda*E[S] = " + std::to_string(util));
  return lambda * m.second / (2.0 * (1.0 - util));
}

/// Full latency summary for one (lambda, spectrum) operating point.
struct QueueStats {
  double mean_service = 0.0;
  double second_moment = 0.0;
  double latency = 0.0;
  double utilization = 0.0;
};

inline QueueStats queue_stats(double lambda, const ServiceMoments& m) {
  QueueStats q;
  q.mean_service = m.mean;
  q.second_moment = m.second;
  q.utilization = lambda * m.mean;
  q.latency = queue_latency(lambda, m);
  return q;
}

/// Largest upload frequency on the stride grid {frame_rate/s : s = 1..max_stride}
/// that is stable and meets the latency budget T; empty when none qualifies.
inline std::optional<double> max_upload_frequency(const ChannelModel& model, double b, double T,
                                                  double frame_rate, int max_stride) {
  if (!(T > 0.0)) throw DomainError("latency budget T must be > 0");
  if (!(frame_rate > 0.0)) throw DomainError("frame_rate must be > 0");
  if (max_stride < 1) throw DomainError("max_stride must be >= 1");
  const ServiceMoments m = service_moments(model, b);
  for (int s = 1; s <= max_stride; ++s) {
    const double lambda = frame_rate / static_cast<double>(s);
    if (lambda * m.mean >= 1.0) continue;
    if (queue_latency(lambda, m) <= T) return lambda;
  }
  return std::nullopt;
}

}  // namespace marqoe
