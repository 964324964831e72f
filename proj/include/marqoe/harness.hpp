#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "marqoe/allocator.hpp"
#include "marqoe/config.hpp"
#include "marqoe/dtwin.hpp"
#include "marqoe/log.hpp"
#include "marqoe/manifest.hpp"
#include "marqoe/oracle.hpp"
#include "marqoe/trace.hpp"

namespace marqoe::harness {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitConfig = 4;

inline std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::uint64_t user_seed(std::uint64_t base, const std::string& user_id) {
  return oracle::detail::mix_seed(base, detail::fnv1a64(user_id));
}

/// Runs f(0..n-1) on a small worker pool; results must go to per-index slots.
template <typename F>
inline void parallel_for(int threads, size_t n, F&& f) {
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::vector<PoseTrace> load_users(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, fs::path>> files;
  if (!fs::is_directory(cfg.trace_dir))
    throw ConfigError("[trace] dir does not exist: " + cfg.trace_dir);
  for (const auto& entry : fs::directory_iterator(cfg.trace_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("user_", 0) != 0 || entry.path().extension() != ".csv") continue;
    const std::string id = entry.path().stem().string().substr(5);
    if (!cfg.users.empty() &&
        std::find(cfg.users.begin(), cfg.users.end(), id) == cfg.users.end())
      continue;
    files.emplace_back(id, entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no user_*.csv traces found in " + cfg.trace_dir);
  std::vector<PoseTrace> traces;
  traces.reserve(files.size());
  for (const auto& [id, path] : files) traces.push_back(load_trace(path.string(), id, cfg.frame_rate));
  return traces;
}

// ---------------------------------------------------------------------------
// SVG output

struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

inline void write_svg_chart(const fs::path& path, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            const std::vector<ChartSeries>& series) {
  const int W = 640, H = 400, ml = 60, mr = 20, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = 1.0;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  const auto X = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  const auto Y = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ofstream out(path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";
  out << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
      << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
      << "' stroke='black'/>\n";
  out << "<text x='" << W / 2 << "' y='" << H - 12 << "' text-anchor='middle' font-size='12'>"
      << x_label << "</text>\n";
  out << "<text x='16' y='" << H / 2 << "' font-size='12' transform='rotate(-90 16 " << H / 2
      << ")' text-anchor='middle'>" << y_label << "</text>\n";
  out << "<text x='" << ml << "' y='" << H - mb + 16 << "' font-size='11' text-anchor='middle'>"
      << fmt_num(xmin) << "</text>\n";
  out << "<text x='" << W - mr << "' y='" << H - mb + 16
      << "' font-size='11' text-anchor='middle'>" << fmt_num(xmax) << "</text>\n";
  out << "<text x='" << ml - 6 << "' y='" << H - mb << "' font-size='11' text-anchor='end'>"
      << fmt_num(ymin) << "</text>\n";
  out << "<text x='" << ml - 6 << "' y='" << mt + 4 << "' font-size='11' text-anchor='end'>"
      << fmt_num(ymax) << "</text>\n";
  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = colors[si % 5];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (const auto& [x, y] : series[si].points) out << X(x) << "," << Y(y) << " ";
    out << "'/>\n";
    for (const auto& [x, y] : series[si].points)
      out << "<circle cx='" << X(x) << "' cy='" << Y(y) << "' r='2.5' fill='" << color << "'/>\n";
    out << "<text x='" << W - mr - 4 << "' y='" << mt + 14 * (si + 1)
        << "' font-size='11' text-anchor='end' fill='" << color << "'>" << series[si].name
        << "</text>\n";
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// import

struct ImportStats {
  int imported = 0;
  int skipped = 0;
};

namespace detail_import {

inline std::string sanitize_id(const std::string& stem) {
  std::string out;
  for (char ch : stem)
    out.push_back(std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_');
  return out;
}

// One row of a source file: whitespace- or comma-separated numbers.
inline bool parse_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::string norm = line;
  for (char& ch : norm)
    if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
  std::istringstream ss(norm);
  std::string tok;
  while (ss >> tok) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || errno == ERANGE) return false;
    out.push_back(v);
  }
  return !out.empty();
}

}  // namespace detail_import

/// Converts a directory of per-participant pose files into canonical traces.
/// Supported source layout: one file per participant (.csv or .txt), each row
/// either `frame tx ty tz yaw pitch roll` or `tx ty tz yaw pitch roll`
/// (comma or whitespace separated, optional header line). Output files are
/// truncated to `frames` rows; shorter or unreadable files are skipped with a
/// warning and flagged through the exit code.
inline int cmd_import(const std::string& dataset_dir, const std::string& out_dir,
                      int frames = 300, ImportStats* stats_out = nullptr) {
  if (!fs::is_directory(dataset_dir))
    throw ConfigError("dataset directory does not exist: " + dataset_dir);
  fs::create_directories(out_dir);

  std::vector<fs::path> sources;
  for (const auto& entry : fs::directory_iterator(dataset_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".csv" || ext == ".txt") sources.push_back(entry.path());
  }
  std::sort(sources.begin(), sources.end());
  if (sources.empty())
    throw ConfigError("unsupported dataset layout: no .csv/.txt participant files in " +
                      dataset_dir);

  ImportStats stats;
  for (const fs::path& src : sources) {
    std::ifstream in(src);
    std::string line;
    std::vector<double> row;
    PoseTrace trace;
    trace.user_id = detail_import::sanitize_id(src.stem().string());
    trace.frame_rate = 30.0;
    bool bad = false;
    size_t width = 0;
    while (std::getline(in, line) && trace.frame_count() < frames) {
      const std::string t = marqoe::detail::trim(line);
      if (t.empty()) continue;
      if (!detail_import::parse_row(t, row)) {
        if (trace.poses.empty() && width == 0) continue;  // header line
        bad = true;
        break;
      }
      if (width == 0) {
        width = row.size();
        if (width != 6 && width != 7) {
          bad = true;
          break;
        }
      } else if (row.size() != width) {
        bad = true;
        break;
      }
      const size_t off = width == 7 ? 1 : 0;
      Pose p;
      for (int c = 0; c < 6; ++c) p.set_component(c, row[off + static_cast<size_t>(c)]);
      if (!p.finite()) {
        bad = true;
        break;
      }
      trace.poses.push_back(p.normalized());
    }
    if (bad || trace.frame_count() < frames) {
      log_warn("import: skipping " + src.filename().string() +
               (bad ? " (unparseable row or unsupported column count)"
                    : " (fewer than " + std::to_string(frames) + " usable rows)"));
      ++stats.skipped;
      continue;
    }
    const fs::path dest = fs::path(out_dir) / ("user_" + trace.user_id + ".csv");
    save_trace(trace, dest.string());
    ++stats.imported;
  }
  if (stats_out != nullptr) *stats_out = stats;
  if (stats.imported == 0)
    throw ConfigError("unsupported dataset layout: no participant file could be imported");
  std::printf("imported %d participant(s), skipped %d\n", stats.imported, stats.skipped);
  return stats.skipped == 0 ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// twins

inline fs::path twin_path(const fs::path& out_dir, const std::string& user_id) {
  return out_dir / "twins" / ("twin_user_" + user_id + ".json");
}

/// Loads twins from out_dir/twins when present, otherwise trains and saves
/// them there. Training runs per user on the worker pool.
inline std::vector<TwinBundle> obtain_twins(const ExperimentConfig& cfg,
                                            const std::vector<PoseTrace>& traces,
                                            const fs::path& out_dir) {
  fs::create_directories(out_dir / "twins");
  std::vector<TwinBundle> twins(traces.size());
  std::vector<char> trained(traces.size(), 0);
  parallel_for(cfg.threads, traces.size(), [&](size_t i) {
    const fs::path path = twin_path(out_dir, traces[i].user_id);
    if (fs::exists(path)) {
      twins[i] = TwinBundle::load(path.string());
      return;
    }
    QoeHyperparams hp = cfg.hyper;
    hp.seed = user_seed(cfg.seed, traces[i].user_id);
    twins[i] = build_twin(traces[i], cfg.pipeline(), cfg.frequencies, cfg.bins, hp);
    twins[i].save(path.string());
    trained[i] = 1;
  });
  int n_trained = 0;
  for (char c : trained) n_trained += c;
  log_info("twins ready: " + std::to_string(twins.size()) + " (" + std::to_string(n_trained) +
           " newly trained)");
  return twins;
}

inline int cmd_train_dt(const ExperimentConfig& cfg, const std::string& out_dir) {
  const auto traces = load_users(cfg);
  const auto twins = obtain_twins(cfg, traces, out_dir);
  std::ostringstream csv;
  csv << "user_id,sample_count,twin_file\n";
  std::vector<std::string> outputs{"twins_index.csv"};
  for (const TwinBundle& t : twins) {
    csv << t.user_id << "," << t.meta.sample_count << ","
        << ("twins/twin_user_" + t.user_id + ".json") << "\n";
    outputs.push_back("twins/twin_user_" + t.user_id + ".json");
  }
  std::ofstream(fs::path(out_dir) / "twins_index.csv") << csv.str();
  write_run_manifest(out_dir, cfg.raw_text, "train-dt", outputs);
  std::printf("trained %zu twin(s) -> %s\n", twins.size(), out_dir.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
  std::string user_id;
  double lambda = 0.0;
  std::string source;  // realized | predicted
  double mean = 0.0;
  std::vector<double> bin_mass;
};

inline std::vector<SweepRow> sweep_user(const PoseTrace& trace, const TwinBundle& twin,
                                        const ExperimentConfig& cfg) {
  std::vector<SweepRow> rows;
  const PipelineConfig pc = cfg.pipeline();
  for (double lambda : cfg.frequencies) {
    SweepRow realized;
    realized.user_id = trace.user_id;
    realized.lambda = lambda;
    realized.source = "realized";
    realized.bin_mass.assign(static_cast<size_t>(cfg.bins) + 1, 0.0);
    const PipelineRun run = run_pipeline(trace, pc, lambda);
    size_t n = 0;
    for (const FrameOutcome& oc : run.frames) {
      if (!oc.hit_rate) continue;
      realized.mean += *oc.hit_rate;
      realized.bin_mass[static_cast<size_t>(hit_rate_bin(*oc.hit_rate, cfg.bins))] += 1.0;
      ++n;
    }
    if (n > 0) {
      realized.mean /= static_cast<double>(n);
      for (double& m : realized.bin_mass) m /= static_cast<double>(n);
    }

    SweepRow predicted = realized;
    predicted.source = "predicted";
    predicted.mean = 0.0;
    predicted.bin_mass.assign(static_cast<size_t>(cfg.bins) + 1, 0.0);
    size_t np = 0;
    for (const FramePrediction& fp : predict_frames(trace, pc, lambda, &twin.clone)) {
      if (!fp.has_prediction) continue;
      const auto dist = twin.qoe.distribution(lambda, fp.predicted);
      for (int k = 0; k <= cfg.bins; ++k) {
        predicted.bin_mass[static_cast<size_t>(k)] += dist[static_cast<size_t>(k)];
        predicted.mean += dist[static_cast<size_t>(k)] * (static_cast<double>(k) / cfg.bins);
      }
      ++np;
    }
    if (np > 0) {
      predicted.mean /= static_cast<double>(np);
      for (double& m : predicted.bin_mass) m /= static_cast<double>(np);
    }
    rows.push_back(std::move(realized));
    rows.push_back(std::move(predicted));
  }
  return rows;
}

inline int cmd_sweep(const ExperimentConfig& cfg, const std::string& out_dir, bool svg) {
  const auto traces = load_users(cfg);
  const auto twins = obtain_twins(cfg, traces, out_dir);

  std::vector<std::vector<SweepRow>> per_user(traces.size());
  parallel_for(cfg.threads, traces.size(),
               [&](size_t i) { per_user[i] = sweep_user(traces[i], twins[i], cfg); });

  std::ostringstream csv;
  csv << "user_id,lambda_hz,source,mean_vchr";
  for (int k = 0; k <= cfg.bins; ++k) csv << ",bin_" << k;
  csv << "\n";
  for (const auto& rows : per_user)
    for (const SweepRow& r : rows) {
      csv << r.user_id << "," << fmt_num(r.lambda) << "," << r.source << "," << fmt_num(r.mean);
      for (double m : r.bin_mass) csv << "," << fmt_num(m);
      csv << "\n";
    }
  fs::create_directories(out_dir);
  std::ofstream(fs::path(out_dir) / "sweep.csv") << csv.str();

  std::vector<std::string> outputs{"sweep.csv"};
  if (svg) {
    for (size_t i = 0; i < traces.size(); ++i) {
      ChartSeries realized{"realized", {}}, predicted{"predicted", {}};
      for (const SweepRow& r : per_user[i])
        (r.source == "realized" ? realized : predicted).points.emplace_back(r.lambda, r.mean);
      const std::string name = "sweep_user_" + traces[i].user_id + ".svg";
      write_svg_chart(fs::path(out_dir) / name, "mean VCHR vs upload frequency (user " +
                          traces[i].user_id + ")",
                      "upload frequency (Hz)", "mean VCHR", {realized, predicted});
      outputs.push_back(name);
    }
  }
  write_run_manifest(out_dir, cfg.raw_text, "sweep", outputs);
  std::printf("sweep written for %zu user(s) -> %s\n", traces.size(), out_dir.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// compare-baseline

inline int cmd_compare_baseline(const ExperimentConfig& cfg, const std::string& out_dir) {
  const auto traces = load_users(cfg);
  if (traces.size() < 2)
    throw ConfigError("compare-baseline needs at least two users, got " +
                      std::to_string(traces.size()));
  const PipelineConfig pc = cfg.pipeline();

  struct UserData {
    std::vector<TrainingSample> all;
    std::vector<TrainingSample> train, holdout;
    QoeModel model;
  };
  std::vector<UserData> data(traces.size());
  parallel_for(cfg.threads, traces.size(), [&](size_t i) {
    const std::uint64_t seed = user_seed(cfg.seed, traces[i].user_id);
    const auto clone_samples = collect_clone_samples(traces[i], pc, cfg.frequencies);
    const ClonedPredictor clone = fit_clone(clone_samples, pc.predictor.method);
    data[i].all = generate_training_set(traces[i], pc, clone, cfg.frequencies, cfg.bins);
    const auto [train_idx, hold_idx] =
        qoe_split(data[i].all.size(), cfg.hyper.holdout_fraction, seed);
    for (size_t k : train_idx) data[i].train.push_back(data[i].all[k]);
    for (size_t k : hold_idx) data[i].holdout.push_back(data[i].all[k]);
    QoeHyperparams hp = cfg.hyper;
    hp.seed = seed;
    hp.holdout_fraction = 0.0;  // split is done here; train on the train part only
    data[i].model = fit_qoe(data[i].train, cfg.bins, hp, traces[i].user_id);
  });

  // The aggregated (user-agnostic) model pools every user's training part.
  std::vector<TrainingSample> pooled;
  for (const UserData& d : data) pooled.insert(pooled.end(), d.train.begin(), d.train.end());
  QoeHyperparams hp_all = cfg.hyper;
  hp_all.seed = user_seed(cfg.seed, "__aggregated__");
  const QoeModel aggregated = fit_qoe(pooled, cfg.bins, hp_all, "aggregated");

  std::ostringstream csv;
  csv << "model,eval_user,cross_entropy,accuracy,n_eval\n";
  for (size_t i = 0; i < traces.size(); ++i) {
    for (size_t j = 0; j < traces.size(); ++j) {
      const auto& holdout = data[j].holdout.empty() ? data[j].all : data[j].holdout;
      csv << "user_" << traces[i].user_id << "," << traces[j].user_id << ","
          << fmt_num(qoe_cross_entropy(data[i].model, holdout)) << ","
          << fmt_num(qoe_accuracy(data[i].model, holdout)) << "," << holdout.size() << "\n";
    }
  }
  for (size_t j = 0; j < traces.size(); ++j) {
    const auto& holdout = data[j].holdout.empty() ? data[j].all : data[j].holdout;
    csv << "aggregated," << traces[j].user_id << ","
        << fmt_num(qoe_cross_entropy(aggregated, holdout)) << ","
        << fmt_num(qoe_accuracy(aggregated, holdout)) << "," << holdout.size() << "\n";
  }
  fs::create_directories(out_dir);
  std::ofstream(fs::path(out_dir) / "compare_baseline.csv") << csv.str();
  write_run_manifest(out_dir, cfg.raw_text, "compare-baseline", {"compare_baseline.csv"});
  std::printf("comparison written for %zu user(s) -> %s\n", traces.size(), out_dir.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// allocate

inline int cmd_allocate(const ExperimentConfig& cfg, const std::string& out_dir, bool validate,
                        std::uint64_t validate_replays = 2000) {
  const auto traces = load_users(cfg);
  const auto twins = obtain_twins(cfg, traces, out_dir);
  const PipelineConfig pc = cfg.pipeline();

  std::vector<AllocationResult> results(traces.size());
  parallel_for(cfg.threads, traces.size(), [&](size_t i) {
    results[i] = qoe_csp(traces[i], twins[i], cfg.channel, cfg.requirement_for(traces[i].user_id),
                         cfg.sweep, cfg.max_latency_s, pc);
  });

  double total = 0.0;
  bool all_feasible = true;
  std::ostringstream csv;
  csv << "user_id,b_star_hz,lambda_star_hz,lhs,phi_inv,feasible\n";
  fs::create_directories(fs::path(out_dir) / "details");
  std::vector<std::string> outputs{"allocation.csv", "allocation_summary.json"};
  for (const AllocationResult& r : results) {
    csv << r.user_id << "," << fmt_num(r.b_star) << "," << fmt_num(r.lambda_star) << ","
        << fmt_num(r.lhs) << "," << fmt_num(r.phi_inv) << "," << (r.feasible ? 1 : 0) << "\n";
    if (r.feasible)
      total += r.b_star;
    else
      all_feasible = false;

    nlohmann::json detail;
    detail["user_id"] = r.user_id;
    detail["feasible"] = r.feasible;
    detail["b_star_hz"] = r.b_star;
    detail["lambda_star_hz"] = r.lambda_star;
    detail["degenerate"] = r.degenerate;
    detail["lhs"] = r.lhs;
    detail["phi_inv"] = r.phi_inv;
    detail["p_hats"] = r.p_hats;
    detail["trail"] = nlohmann::json::array();
    for (const SweepPoint& pt : r.trail)
      detail["trail"].push_back({{"b_hz", pt.b},
                                 {"lambda_feasible", pt.lambda_feasible},
                                 {"lambda_hz", pt.lambda},
                                 {"degenerate", pt.degenerate},
                                 {"lhs", pt.lhs},
                                 {"satisfied", pt.satisfied}});
    const std::string name = "details/alloc_user_" + r.user_id + ".json";
    std::ofstream(fs::path(out_dir) / name) << detail.dump(2) << "\n";
    outputs.push_back(name);
  }
  std::ofstream(fs::path(out_dir) / "allocation.csv") << csv.str();

  bool band_ok = true;
  if (validate) {
    std::ostringstream vcsv;
    vcsv << "user_id,b_star_hz,empirical,ci_low,ci_high,band,pass\n";
    std::vector<oracle::ReplayReport> reports(traces.size());
    parallel_for(cfg.threads, traces.size(), [&](size_t i) {
      if (!results[i].feasible) return;
      reports[i] = oracle::replay_constraint(
          traces[i], cfg.channel, results[i].b_star, cfg.requirement_for(traces[i].user_id), pc,
          cfg.max_latency_s, cfg.sweep.max_stride, validate_replays,
          user_seed(cfg.seed, traces[i].user_id) ^ 0xfeedULL);
    });
    for (size_t i = 0; i < traces.size(); ++i) {
      if (!results[i].feasible) continue;
      const double band = cfg.requirement_for(traces[i].user_id).epsilon - 0.05;
      const bool pass = reports[i].empirical >= band;
      band_ok = band_ok && pass;
      vcsv << traces[i].user_id << "," << fmt_num(results[i].b_star) << ","
           << fmt_num(reports[i].empirical) << "," << fmt_num(reports[i].ci_low) << ","
           << fmt_num(reports[i].ci_high) << "," << fmt_num(band) << "," << (pass ? 1 : 0)
           << "\n";
    }
    std::ofstream(fs::path(out_dir) / "validation.csv") << vcsv.str();
    outputs.push_back("validation.csv");
  }

  nlohmann::json summary;
  summary["total_spectrum_hz"] = total;
  summary["all_feasible"] = all_feasible;
  summary["users"] = results.size();
  std::ofstream(fs::path(out_dir) / "allocation_summary.json") << summary.dump(2) << "\n";
  write_run_manifest(out_dir, cfg.raw_text, "allocate", outputs,
                     {{"total_spectrum_hz", total}, {"all_feasible", all_feasible}});

  std::printf("total_spectrum_hz=%s all_feasible=%d\n", fmt_num(total).c_str(),
              all_feasible ? 1 : 0);
  if (!all_feasible) return kExitInfeasible;
  if (validate && !band_ok) return kExitValidation;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// validate-clt / validate-queue

inline int cmd_validate_clt(const std::string& out_dir, int cases, std::uint64_t seed,
                            double tolerance) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_dist(100, 1000);
  std::uniform_real_distribution<double> p_dist(0.1, 0.9);
  std::uniform_real_distribution<double> z_dist(-3.0, 3.0);

  std::ostringstream csv;
  csv << oracle::OracleReport::csv_header() << "\n";
  bool ok = true;
  double max_gap = 0.0;
  for (int t = 0; t < cases; ++t) {
    const int n = n_dist(rng);
    std::vector<double> p(static_cast<size_t>(n));
    double mu = 0.0, var = 0.0;
    for (double& v : p) {
      v = p_dist(rng);
      mu += v;
      var += v * (1.0 - v);
    }
    if (var < 5.0) continue;
    const double rho =
        std::clamp((mu + z_dist(rng) * std::sqrt(var)) / static_cast<double>(n), 0.01, 1.0);
    const auto report = oracle::compare_clt(p, rho, tolerance);
    max_gap = std::max(max_gap, report.abs_error);
    ok = ok && report.pass;
    csv << report.name << "," << report.size << "," << fmt_num(report.reference) << ","
        << fmt_num(report.approximate) << "," << fmt_num(report.abs_error) << ","
        << fmt_num(report.rel_error) << "," << fmt_num(report.tolerance) << ","
        << (report.pass ? 1 : 0) << "\n";
  }
  fs::create_directories(out_dir);
  std::ofstream(fs::path(out_dir) / "validate_clt.csv") << csv.str();
  std::printf("clt cases=%d max_gap=%s pass=%d\n", cases, fmt_num(max_gap).c_str(), ok ? 1 : 0);
  return ok ? kExitOk : kExitValidation;
}

inline int cmd_validate_queue(const ExperimentConfig& cfg, const std::string& out_dir,
                              std::uint64_t arrivals, std::uint64_t seed) {
  std::ostringstream csv;
  csv << "service,utilization,lambda_hz,formula_s,sim_wait_s,sim_sojourn_s,rel_error,pass\n";
  bool ok = true;
  const double b = 1.0;

  for (const char* kind : {"deterministic", "snr_induced"}) {
    ChannelModel ch = cfg.channel;
    ch.alpha_bits = cfg.channel.alpha_bits;
    if (std::string(kind) == "deterministic") ch.snr_model = SnrModel::Constant;
    const ServiceMoments m = service_moments(ch, b);
    const auto sampler = [ch, b](std::mt19937_64& rng) {
      return ch.alpha_bits / rate(b, ch.sample_snr(rng));
    };
    for (double util : {0.2, 0.5, 0.8}) {
      const double lambda = util / m.mean;
      const double tau = queue_latency(lambda, m);
      const auto sim = oracle::simulate_dg1(lambda, sampler, arrivals, seed);
      bool pass;
      double rel;
      if (std::string(kind) == "deterministic") {
        // D/D/1: no queueing; the check is wait ~ 0, sojourn ~ E[S]
        rel = std::abs(sim.mean_sojourn - m.mean) / m.mean;
        pass = sim.mean_wait <= 1e-9 && rel <= 1e-9;
      } else {
        rel = std::abs(sim.mean_wait - tau) / tau;
        pass = rel <= 0.15;
      }
      ok = ok && pass;
      csv << kind << "," << fmt_num(util) << "," << fmt_num(lambda) << "," << fmt_num(tau) << ","
          << fmt_num(sim.mean_wait) << "," << fmt_num(sim.mean_sojourn) << "," << fmt_num(rel)
          << "," << (pass ? 1 : 0) << "\n";
    }
  }
  fs::create_directories(out_dir);
  std::ofstream(fs::path(out_dir) / "validate_queue.csv") << csv.str();
  write_run_manifest(out_dir, cfg.raw_text, "validate-queue", {"validate_queue.csv"});
  std::printf("queue validation %s\n", ok ? "pass" : "FAIL");
  return ok ? kExitOk : kExitValidation;
}

}  // namespace marqoe::harness
