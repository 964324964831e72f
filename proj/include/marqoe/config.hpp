#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "marqoe/allocator.hpp"
#include "marqoe/channel.hpp"
#include "marqoe/common.hpp"
#include "marqoe/dtwin.hpp"
#include "marqoe/pipeline.hpp"

namespace marqoe {

namespace detail {

// Minimal "[section] key = value" reader. '#' and ';' start comments; values
// keep internal whitespace, lists are comma separated.
struct IniFile {
  std::map<std::string, std::map<std::string, std::string>> sections;

  static IniFile parse(const std::string& text) {
    IniFile ini;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const size_t hash = line.find_first_of("#;");
      if (hash != std::string::npos) line = line.substr(0, hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      ini.sections[section][key] = value;
    }
    return ini;
  }

  bool has(const std::string& sec, const std::string& key) const {
    const auto s = sections.find(sec);
    return s != sections.end() && s->second.count(key) > 0;
  }

  std::string get(const std::string& sec, const std::string& key,
                  const std::string& fallback) const {
    const auto s = sections.find(sec);
    if (s == sections.end()) return fallback;
    const auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
  }

  double get_num(const std::string& sec, const std::string& key, double fallback) const {
    const std::string v = get(sec, key, "");
    if (v.empty()) return fallback;
    try {
      size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config [" + sec + "] " + key + ": bad number '" + v + "'");
    }
  }

  int get_int(const std::string& sec, const std::string& key, int fallback) const {
    const double d = get_num(sec, key, static_cast<double>(fallback));
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d)
      throw ConfigError("config [" + sec + "] " + key + ": expected an integer");
    return i;
  }

  bool get_bool(const std::string& sec, const std::string& key, bool fallback) const {
    const std::string v = get(sec, key, "");
    if (v.empty()) return fallback;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config [" + sec + "] " + key + ": bad boolean '" + v + "'");
  }

  std::vector<double> get_list(const std::string& sec, const std::string& key,
                               const std::vector<double>& fallback) const {
    const std::string v = get(sec, key, "");
    if (v.empty()) return fallback;
    std::vector<double> out;
    for (const std::string& tok : split(v, ',')) {
      const std::string t = trim(tok);
      if (t.empty()) continue;
      try {
        out.push_back(std::stod(t));
      } catch (const std::exception&) {
        throw ConfigError("config [" + sec + "] " + key + ": bad list entry '" + t + "'");
      }
    }
    return out;
  }
};

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// One experiment = one config file; sections mirror the library modules.
struct ExperimentConfig {
  std::string raw_text;  // exact bytes, for hashing and provenance copies

  // [trace]
  std::string trace_dir = "traces";
  double frame_rate = 30.0;
  std::vector<std::string> users;  // empty = every user_*.csv in trace_dir

  // [grid] / [frustum]
  CellGrid grid;
  FrustumParams frustum;
  bool occlusion = true;

  // [channel]
  ChannelModel channel;
  double gamma_min_frac = 0.01;  // gamma_min = frac * gamma_bar
  double max_latency_s = 0.05;   // T

  // [predictor]
  PredictorConfig predictor;
  int warmup_frames = 30;

  // [twin]
  int bins = 10;
  std::vector<double> frequencies{1, 2, 3, 5, 6, 10, 15, 30};
  QoeHyperparams hyper;

  // [requirement]
  QoeRequirement requirement;
  std::map<std::string, double> per_user_vchr;

  // [sweep]
  SweepParams sweep;

  // [run]
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware default

  PipelineConfig pipeline() const {
    PipelineConfig p;
    p.grid = grid;
    p.frustum = frustum;
    p.occlusion = occlusion;
    p.predictor = predictor;
    p.warmup_frames = warmup_frames;
    return p;
  }

  QoeRequirement requirement_for(const std::string& user_id) const {
    QoeRequirement r = requirement;
    const auto it = per_user_vchr.find(user_id);
    if (it != per_user_vchr.end()) r.vchr_threshold = it->second;
    return r;
  }

  std::uint64_t config_hash() const { return detail::fnv1a64(raw_text); }

  void validate() const {
    if (!(frame_rate > 0.0)) throw ConfigError("[trace] frame_rate must be > 0");
    try {
      grid.validate();
      frustum.validate();
      channel.validate();
      predictor.validate();
      requirement.validate();
      sweep.validate();
    } catch (const DomainError& e) {
      throw ConfigError(std::string("invalid config: ") + e.what());
    }
    if (warmup_frames < 1) throw ConfigError("[predictor] warmup_frames must be >= 1");
    if (bins < 1) throw ConfigError("[twin] bins must be >= 1");
    if (frequencies.empty()) throw ConfigError("[twin] frequencies must not be empty");
    for (double f : frequencies)
      if (!(f > 0.0) || f > frame_rate)
        throw ConfigError("[twin] frequencies must lie in (0, frame_rate]");
    for (const auto& [user, v] : per_user_vchr)
      if (!(v >= 0.0) || !(v <= 1.0))
        throw ConfigError("[requirement] vchr_user_" + user + " must be in [0, 1]");
  }
};

inline ExperimentConfig parse_experiment_config(const std::string& text) {
  const auto ini = detail::IniFile::parse(text);
  ExperimentConfig c;
  c.raw_text = text;

  c.trace_dir = ini.get("trace", "dir", c.trace_dir);
  c.frame_rate = ini.get_num("trace", "frame_rate", c.frame_rate);
  {
    const std::string users = ini.get("trace", "users", "");
    for (const std::string& tok : detail::split(users, ',')) {
      const std::string t = detail::trim(tok);
      if (!t.empty()) c.users.push_back(t);
    }
  }

  {
    const auto o = ini.get_list("grid", "origin", {c.grid.origin.x, c.grid.origin.y, c.grid.origin.z});
    const auto e = ini.get_list("grid", "extent", {c.grid.extent.x, c.grid.extent.y, c.grid.extent.z});
    const auto d = ini.get_list("grid", "divisions",
                                {static_cast<double>(c.grid.divisions[0]),
                                 static_cast<double>(c.grid.divisions[1]),
                                 static_cast<double>(c.grid.divisions[2])});
    if (o.size() != 3 || e.size() != 3 || d.size() != 3)
      throw ConfigError("[grid] origin/extent/divisions need 3 entries each");
    c.grid.origin = {o[0], o[1], o[2]};
    c.grid.extent = {e[0], e[1], e[2]};
    c.grid.divisions = {static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2])};
  }

  c.frustum.h_fov_deg = ini.get_num("frustum", "h_fov_deg", c.frustum.h_fov_deg);
  c.frustum.v_fov_deg = ini.get_num("frustum", "v_fov_deg", c.frustum.v_fov_deg);
  c.frustum.near_m = ini.get_num("frustum", "near_m", c.frustum.near_m);
  c.frustum.far_m = ini.get_num("frustum", "far_m", c.frustum.far_m);
  c.occlusion = ini.get_bool("frustum", "occlusion", c.occlusion);

  c.channel.snr_model = snr_model_from_string(
      ini.get("channel", "snr_model", to_string(c.channel.snr_model)));
  c.channel.gamma_bar = ini.get_num("channel", "gamma_bar", c.channel.gamma_bar);
  c.gamma_min_frac = ini.get_num("channel", "gamma_min_frac", c.gamma_min_frac);
  c.channel.gamma_min = c.gamma_min_frac * c.channel.gamma_bar;
  c.channel.alpha_bits = ini.get_num("channel", "alpha_bits", c.channel.alpha_bits);
  c.max_latency_s = ini.get_num("channel", "max_latency_s", c.max_latency_s);

  c.predictor.method = predict_method_from_string(
      ini.get("predictor", "method", to_string(c.predictor.method)));
  c.predictor.history_frames = ini.get_int("predictor", "history_frames", c.predictor.history_frames);
  c.predictor.lookahead_frames =
      ini.get_int("predictor", "lookahead_frames", c.predictor.lookahead_frames);
  c.warmup_frames = ini.get_int("predictor", "warmup_frames", c.warmup_frames);

  c.bins = ini.get_int("twin", "bins", c.bins);
  c.frequencies = ini.get_list("twin", "frequencies", c.frequencies);
  c.hyper.hidden = ini.get_int("twin", "hidden", c.hyper.hidden);
  c.hyper.max_epochs = ini.get_int("twin", "max_epochs", c.hyper.max_epochs);
  c.hyper.learning_rate = ini.get_num("twin", "learning_rate", c.hyper.learning_rate);
  c.hyper.holdout_fraction = ini.get_num("twin", "holdout_fraction", c.hyper.holdout_fraction);
  c.hyper.patience = ini.get_int("twin", "patience", c.hyper.patience);

  c.requirement.vchr_threshold =
      ini.get_num("requirement", "vchr_threshold", c.requirement.vchr_threshold);
  c.requirement.rho = ini.get_num("requirement", "rho", c.requirement.rho);
  c.requirement.epsilon = ini.get_num("requirement", "epsilon", c.requirement.epsilon);
  {
    const auto sec = ini.sections.find("requirement");
    if (sec != ini.sections.end()) {
      for (const auto& [key, value] : sec->second) {
        if (key.rfind("vchr_user_", 0) == 0) {
          const std::string user = key.substr(10);
          c.per_user_vchr[user] = ini.get_num("requirement", key, 0.0);
        }
      }
    }
  }

  c.sweep.b_min = ini.get_num("sweep", "b_min_hz", c.sweep.b_min);
  c.sweep.b_max = ini.get_num("sweep", "b_max_hz", c.sweep.b_max);
  c.sweep.delta = ini.get_num("sweep", "delta_hz", c.sweep.delta);
  c.sweep.max_stride = ini.get_int("sweep", "max_stride", c.sweep.max_stride);

  c.seed = static_cast<std::uint64_t>(ini.get_num("run", "seed", static_cast<double>(c.seed)));
  c.hyper.seed = c.seed;
  c.threads = ini.get_int("run", "threads", c.threads);

  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

}  // namespace marqoe
