#pragma once

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "marqoe/common.hpp"

namespace marqoe {

/// One 6-DoF device pose: translation in meters, rotation as Euler angles
/// (yaw, pitch, roll) in degrees, normalized to [-180, 180).
struct Pose {
  double tx = 0.0;
  double ty = 0.0;
  double tz = 0.0;
  double theta_x = 0.0;  // yaw
  double theta_y = 0.0;  // pitch
  double theta_z = 0.0;  // roll

  Vec3 position() const { return {tx, ty, tz}; }

  double component(int c) const {
    switch (c) {
      case 0: return tx;
      case 1: return ty;
      case 2: return tz;
      case 3: return theta_x;
      case 4: return theta_y;
      case 5: return theta_z;
    }
    throw DomainError("pose component index out of range");
  }

  void set_component(int c, double v) {
    switch (c) {
      case 0: tx = v; return;
      case 1: ty = v; return;
      case 2: tz = v; return;
      case 3: theta_x = v; return;
      case 4: theta_y = v; return;
      case 5: theta_z = v; return;
    }
    throw DomainError("pose component index out of range");
  }

  static bool is_angle_component(int c) { return c >= 3; }

  bool finite() const {
    for (int c = 0; c < 6; ++c)
      if (!std::isfinite(component(c))) return false;
    return true;
  }

  Pose normalized() const {
    Pose p = *this;
    p.theta_x = normalize_angle_deg(theta_x);
    p.theta_y = normalize_angle_deg(theta_y);
    p.theta_z = normalize_angle_deg(theta_z);
    return p;
  }
};

/// Time-ordered pose sequence for one user at a fixed capture rate.
/// Frame numbers are implicit: poses[f] is the pose of frame f.
struct PoseTrace {
  std::string user_id;
  double frame_rate = 0.0;  // Hz
  std::vector<Pose> poses;

  int frame_count() const { return static_cast<int>(poses.size()); }

  void validate() const {
    if (!(frame_rate > 0.0)) throw DomainError("frame_rate must be > 0");
    if (poses.empty()) throw IntegrityError("trace has no poses");
    for (const Pose& p : poses)
      if (!p.finite()) throw DataError("non-finite pose component");
  }
};

/// Uniform subsequence of a trace: frames 0, s, 2s, ... at stride
/// s = round(frame_rate / upload_frequency).
struct SampledTrace {
  PoseTrace source;
  double upload_frequency = 0.0;  // Hz
  int stride = 1;
  std::vector<int> selected_indices;

  const Pose& pose_at(int frame) const { return source.poses.at(static_cast<size_t>(frame)); }
};

inline int upload_stride(double frame_rate, double lambda) {
  if (!(lambda > 0.0) || lambda > frame_rate)
    throw DomainError("upload frequency must satisfy 0 < lambda <= frame_rate");
  return static_cast<int>(std::llround(frame_rate / lambda));
}

inline SampledTrace downsample(const PoseTrace& trace, double lambda) {
  trace.validate();
  const int stride = upload_stride(trace.frame_rate, lambda);
  SampledTrace s;
  s.source = trace;
  s.upload_frequency = lambda;
  s.stride = stride;
  for (int f = 0; f < trace.frame_count(); f += stride) s.selected_indices.push_back(f);
  return s;
}

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& tok, int line_no) {
  const std::string t = trim(tok);
  if (t.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty field");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE)
    throw ParseError("line " + std::to_string(line_no) + ": bad number '" + t + "'");
  return v;
}

inline long parse_long(const std::string& tok, int line_no) {
  const std::string t = trim(tok);
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
    throw ParseError("line " + std::to_string(line_no) + ": bad integer '" + t + "'");
  return v;
}

}  // namespace detail

inline constexpr const char* kTraceCsvHeader = "frame,tx,ty,tz,theta_x,theta_y,theta_z";

/// Reads a canonical trace CSV. Frame numbers must run 0..N-1 without gaps;
/// angles are normalized on load.
inline PoseTrace load_trace(const std::string& path, const std::string& user_id,
                            double frame_rate) {
  std::ifstream in(path);
  if (!in) throw IntegrityError("cannot open trace file: " + path);

  PoseTrace trace;
  trace.user_id = user_id;
  trace.frame_rate = frame_rate;

  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (!saw_header) {
      if (t != kTraceCsvHeader)
        throw ParseError("line 1: expected header '" + std::string(kTraceCsvHeader) + "'");
      saw_header = true;
      continue;
    }
    const auto fields = detail::split(t, ',');
    if (fields.size() != 7)
      throw ParseError("line " + std::to_string(line_no) + ": expected 7 fields, got " +
                       std::to_string(fields.size()));
    const long frame = detail::parse_long(fields[0], line_no);
    if (frame != trace.frame_count())
      throw IntegrityError("line " + std::to_string(line_no) + ": frame " +
                           std::to_string(frame) + " breaks contiguous numbering (expected " +
                           std::to_string(trace.frame_count()) + ")");
    Pose p;
    for (int c = 0; c < 6; ++c) p.set_component(c, detail::parse_double(fields[c + 1], line_no));
    if (!p.finite())
      throw DataError("line " + std::to_string(line_no) + ": non-finite pose component");
    trace.poses.push_back(p.normalized());
  }
  if (!saw_header) throw IntegrityError("empty trace file: " + path);
  trace.validate();
  return trace;
}

inline void save_trace(const PoseTrace& trace, const std::string& path) {
  trace.validate();
  std::ofstream out(path);
  if (!out) throw IntegrityError("cannot write trace file: " + path);
  out << kTraceCsvHeader << "\n";
  char buf[512];
  for (int f = 0; f < trace.frame_count(); ++f) {
    const Pose& p = trace.poses[static_cast<size_t>(f)];
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", f, p.tx, p.ty,
                  p.tz, p.theta_x, p.theta_y, p.theta_z);
    out << buf;
  }
}

}  // namespace marqoe
