/*
 * petmc : list-mode PET simulation, motion-compensated reconstruction
 *         and AD/CN classification study toolkit
 *
 * Copyright 2026 the petmc developers
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef PETMC_PIPELINE_HPP
#define PETMC_PIPELINE_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "petmc/classify.hpp"
#include "petmc/config.hpp"
#include "petmc/features.hpp"
#include "petmc/metrics.hpp"
#include "petmc/motion.hpp"
#include "petmc/phantom.hpp"
#include "petmc/recon.hpp"
#include "petmc/simulate.hpp"
#include "petmc/volume.hpp"

namespace petmc {

inline constexpr const char* kToolVersion = "1.0.0";

namespace detail {

namespace fs = std::filesystem;

inline void atomic_replace(const fs::path& tmp, const fs::path& final_path) {
  fs::rename(tmp, final_path);
}

template <typename WriteFn>
inline void atomic_write(const fs::path& path, WriteFn&& write_fn) {
  const fs::path tmp = path.string() + ".tmp";
  write_fn(tmp.string());
  atomic_replace(tmp, path);
}

inline double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Feature CSV: header `subject_id,label,depth,f0..f{n-1}`, one row per file.
// ---------------------------------------------------------------------------

struct FeatureRecord {
  std::string subject_id;
  Label label = Label::CN;
  int depth = 0;
  std::vector<double> values;
};

inline void write_feature_csv(const FeatureRecord& rec, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_feature_csv: cannot open " + path);
  os << "subject_id,label,depth";
  for (std::size_t i = 0; i < rec.values.size(); ++i) os << ",f" << i;
  os << '\n';
  os.precision(17);
  os << rec.subject_id << ',' << to_string(rec.label) << ',' << rec.depth;
  for (const double v : rec.values) os << ',' << v;
  os << '\n';
  if (!os) throw std::runtime_error("write_feature_csv: write failed for " + path);
}

inline FeatureRecord read_feature_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_feature_csv: cannot open " + path);
  std::string header, row;
  if (!std::getline(is, header) || header.rfind("subject_id,label,depth", 0) != 0)
    throw std::runtime_error("read_feature_csv: bad header in " + path);
  if (!std::getline(is, row)) throw std::runtime_error("read_feature_csv: missing row in " + path);
  FeatureRecord rec;
  std::istringstream ss(row);
  std::string field;
  if (!std::getline(ss, rec.subject_id, ',')) throw std::runtime_error("read_feature_csv: short row");
  if (!std::getline(ss, field, ',')) throw std::runtime_error("read_feature_csv: short row");
  rec.label = label_from_string(field);
  if (!std::getline(ss, field, ',')) throw std::runtime_error("read_feature_csv: short row");
  rec.depth = std::stoi(field);
  while (std::getline(ss, field, ',')) rec.values.push_back(std::stod(field));
  return rec;
}

// ---------------------------------------------------------------------------
// Per-subject stage execution. Stages communicate exclusively through files
// so that resumed and fresh runs see bit-identical inputs.
// ---------------------------------------------------------------------------

namespace detail {

struct SubjectPaths {
  fs::path dir;
  fs::path activity, mu, trace, events;
  fs::path recon_mc, recon_nmc, sidecar_mc, sidecar_nmc;

  SubjectPaths(const fs::path& run_dir, const std::string& id) {
    dir = run_dir / "subjects" / id;
    activity = dir / "activity.pvol";
    mu = dir / "mu.pvol";
    trace = dir / "trace.csv";
    events = dir / "events.plm";
    recon_mc = dir / "recon_mc.pvol";
    recon_nmc = dir / "recon_nmc.pvol";
    sidecar_mc = dir / "recon_mc.json";
    sidecar_nmc = dir / "recon_nmc.json";
  }

  fs::path feature(const std::string& mode, int depth) const {
    return dir / ("features_" + mode + "_d" + std::to_string(depth) + ".csv");
  }
};

inline void write_recon_sidecar(const fs::path& path, const ExperimentConfig& cfg, bool mc,
                                std::size_t events_used, double wall_s) {
  nlohmann::json j;
  j["mode"] = mc ? "MC" : "NMC";
  j["iterations"] = cfg.recon.iterations;
  j["subsets"] = cfg.recon.subsets;
  j["psf_fwhm_mm"] = cfg.recon.psf_fwhm_mm;
  j["grid_dim"] = cfg.recon.grid_dims[0];
  j["voxel_mm"] = cfg.recon.grid_voxel_mm[0];
  j["sensitivity_lors"] = cfg.recon.sensitivity_lors;
  j["events_used"] = events_used;
  j["wall_seconds"] = wall_s;
  atomic_write(path, [&](const std::string& tmp) {
    std::ofstream os(tmp);
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("cannot write " + tmp);
  });
}

/// True when the stage ran (outputs missing or forced), false when skipped.
template <typename Fn>
inline bool run_stage(bool force, const std::vector<fs::path>& outputs, Fn&& fn) {
  if (!force) {
    bool all = true;
    for (const fs::path& p : outputs)
      if (!fs::exists(p)) {
        all = false;
        break;
      }
    if (all) return false;
  }
  fn();
  return true;
}

struct StageClock {
  std::mutex mutex;
  double phantom_s = 0, trace_s = 0, simulate_s = 0, recon_s = 0, features_s = 0;

  void add(double& slot, double v) {
    std::lock_guard<std::mutex> lock(mutex);
    slot += v;
  }
};

inline bool subject_needs_nmc_features(const ExperimentConfig& cfg, const SubjectRecord& rec) {
  return rec.split == Split::test || cfg.train_on_nmc;
}

inline void process_subject(const ExperimentConfig& cfg, const SubjectRecord& rec,
                            const fs::path& run_dir, StageClock& clock) {
  const SubjectPaths paths(run_dir, rec.id);
  fs::create_directories(paths.dir);
  const auto head_points = default_head_points();

  bool regen_phantom, regen_trace, regen_sim, regen_mc, regen_nmc;

  {
    const auto t0 = std::chrono::steady_clock::now();
    regen_phantom = run_stage(false, {paths.activity, paths.mu}, [&] {
      auto [activity, attenuation] =
          make_phantom(cfg.phantom, rec.label, derive_seed(rec.seed, 1), cfg.recon.grid_dims,
                       cfg.recon.grid_voxel_mm);
      atomic_write(paths.activity, [&](const std::string& tmp) { write_volume(activity, tmp); });
      atomic_write(paths.mu, [&](const std::string& tmp) { write_volume(attenuation, tmp); });
    });
    if (regen_phantom) clock.add(clock.phantom_s, seconds_since(t0));
  }

  {
    const auto t0 = std::chrono::steady_clock::now();
    regen_trace = run_stage(false, {paths.trace}, [&] {
      const std::uint64_t trace_seed = derive_seed(rec.seed, 2);
      const double amplitude =
          calibrate_trace_amplitude(cfg.trace_kind, rec.motion_target_mm, cfg.trace_segments,
                                    cfg.scan_duration_s, trace_seed, head_points);
      const MotionTrace trace =
          gen_trace(cfg.trace_kind, amplitude, cfg.trace_segments, cfg.scan_duration_s, trace_seed);
      atomic_write(paths.trace, [&](const std::string& tmp) { write_trace_csv(trace, tmp); });
    });
    if (regen_trace) clock.add(clock.trace_s, seconds_since(t0));
  }

  {
    const auto t0 = std::chrono::steady_clock::now();
    regen_sim = run_stage(regen_phantom || regen_trace, {paths.events}, [&] {
      const Volume3D activity = read_volume(paths.activity.string());
      const Volume3D mu = read_volume(paths.mu.string());
      const MotionTrace trace = read_trace_csv(paths.trace.string(), cfg.scan_duration_s);
      const EventStream stream = simulate_listmode(activity, mu, trace, cfg.scanner,
                                                   cfg.events_per_subject, derive_seed(rec.seed, 3));
      atomic_write(paths.events, [&](const std::string& tmp) { write_listmode(stream, tmp); });
    });
    if (regen_sim) clock.add(clock.simulate_s, seconds_since(t0));
  }

  // One normalization per study: the sensitivity image models the scanner, not
  // the subject, so its endpoint sequence derives from the master seed alone.
  const std::uint64_t sens_seed = derive_seed(cfg.master_seed, 4);
  {
    const auto t0 = std::chrono::steady_clock::now();
    bool ran_any = false;
    regen_mc = run_stage(regen_sim || regen_trace, {paths.recon_mc, paths.sidecar_mc}, [&] {
      ran_any = true;
      const Volume3D mu = read_volume(paths.mu.string());
      const MotionTrace trace = read_trace_csv(paths.trace.string(), cfg.scan_duration_s);
      const EventStream stream = read_listmode(paths.events.string());
      const auto r0 = std::chrono::steady_clock::now();
      const SensitivityImage sens = sensitivity_image(cfg.scanner, mu, &trace, cfg.recon, sens_seed);
      const Volume3D img =
          osem_listmode(stream, cfg.scanner, mu, &trace, cfg.recon, sens_seed, &sens);
      atomic_write(paths.recon_mc, [&](const std::string& tmp) { write_volume(img, tmp); });
      write_recon_sidecar(paths.sidecar_mc, cfg, true, stream.events.size(), seconds_since(r0));
    });
    regen_nmc = run_stage(regen_sim, {paths.recon_nmc, paths.sidecar_nmc}, [&] {
      ran_any = true;
      const Volume3D mu = read_volume(paths.mu.string());
      const EventStream stream = read_listmode(paths.events.string());
      const auto r0 = std::chrono::steady_clock::now();
      const SensitivityImage sens = sensitivity_image(cfg.scanner, mu, nullptr, cfg.recon, sens_seed);
      const Volume3D img =
          osem_listmode(stream, cfg.scanner, mu, nullptr, cfg.recon, sens_seed, &sens);
      atomic_write(paths.recon_nmc, [&](const std::string& tmp) { write_volume(img, tmp); });
      write_recon_sidecar(paths.sidecar_nmc, cfg, false, stream.events.size(), seconds_since(r0));
    });
    if (ran_any) clock.add(clock.recon_s, seconds_since(t0));
  }

  {
    const auto t0 = std::chrono::steady_clock::now();
    bool ran_any = false;
    const auto extract_mode = [&](const std::string& mode, const fs::path& recon_path, bool force) {
      std::vector<fs::path> outs;
      for (const int d : cfg.depths) outs.push_back(paths.feature(mode, d));
      return run_stage(force, outs, [&] {
        ran_any = true;
        const Volume3D recon = read_volume(recon_path.string());
        const std::array<int, 3> cube{cfg.encoder.input_dim, cfg.encoder.input_dim,
                                      cfg.encoder.input_dim};
        const Volume3D resampled = resample(recon, cube);
        const auto stages = encode(resampled, cfg.encoder);
        for (const int d : cfg.depths) {
          FeatureRecord fr;
          fr.subject_id = rec.id;
          fr.label = rec.label;
          fr.depth = d;
          fr.values = reduce_maxpool(stages[static_cast<std::size_t>(d - 1)]);
          atomic_write(paths.feature(mode, d),
                       [&](const std::string& tmp) { write_feature_csv(fr, tmp); });
        }
      });
    };
    extract_mode("mc", paths.recon_mc, regen_mc);
    if (subject_needs_nmc_features(cfg, rec)) extract_mode("nmc", paths.recon_nmc, regen_nmc);
    if (ran_any) clock.add(clock.features_s, seconds_since(t0));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Classifier stage: collect cached features, fit per-depth SVMs plus the
// deepest-feature logistic head, evaluate test MC/NMC, emit report and ROC
// figures. Cheap relative to reconstruction, so it always recomputes.
// ---------------------------------------------------------------------------

struct ReportRow {
  std::string tracer_analog;
  std::string feature_depth;  // "1".."4" or "head"
  std::string mode;           // "MC" or "NMC"
  MetricsReport metrics;
};

inline std::string format_report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "tracer_analog,feature_depth,mode,accuracy,precision,recall,f1,auroc\n";
  char buf[256];
  for (const ReportRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.tracer_analog.c_str(),
                  r.feature_depth.c_str(), r.mode.c_str(), r.metrics.accuracy, r.metrics.precision,
                  r.metrics.recall, r.metrics.f1, r.metrics.auroc);
    os << buf;
  }
  return os.str();
}

namespace detail {

struct DepthEval {
  SvmModel model;
  std::vector<double> scores_mc, scores_nmc;
  std::vector<bool> labels;
  MetricsReport mc, nmc;
};

inline std::vector<double> load_features_for(const fs::path& run_dir, const std::string& id,
                                             const std::string& mode, int depth) {
  const SubjectPaths paths(run_dir, id);
  const fs::path p = paths.feature(mode, depth);
  if (!fs::exists(p))
    throw std::runtime_error("missing stage output: " + p.string() + " (run the pipeline first)");
  return read_feature_csv(p.string()).values;
}

inline DepthEval evaluate_depth(const ExperimentConfig& cfg, const fs::path& run_dir,
                                const std::vector<SubjectRecord>& records, int depth, bool head) {
  std::vector<std::vector<double>> train_x;
  std::vector<int> train_y;
  std::vector<std::vector<double>> test_mc, test_nmc;
  std::vector<bool> test_labels;

  for (const SubjectRecord& rec : records) {
    const int y = (rec.label == Label::AD) ? 1 : -1;
    if (rec.split == Split::train || rec.split == Split::val) {
      train_x.push_back(load_features_for(run_dir, rec.id, "mc", depth));
      train_y.push_back(y);
      if (cfg.train_on_nmc) {
        train_x.push_back(load_features_for(run_dir, rec.id, "nmc", depth));
        train_y.push_back(y);
      }
    } else {
      test_mc.push_back(load_features_for(run_dir, rec.id, "mc", depth));
      test_nmc.push_back(load_features_for(run_dir, rec.id, "nmc", depth));
      test_labels.push_back(rec.label == Label::AD);
    }
  }

  DepthEval ev;
  ev.model = head ? head_train(train_x, train_y, cfg.head_lr, cfg.head_epochs)
                  : svm_train(train_x, train_y, cfg.svm_c, cfg.svm_tol, cfg.svm_max_epochs);
  ev.model.depth = depth;
  ev.labels = test_labels;

  std::vector<bool> pred_mc, pred_nmc;
  for (std::size_t i = 0; i < test_mc.size(); ++i) {
    ev.scores_mc.push_back(svm_score(ev.model, test_mc[i]));
    ev.scores_nmc.push_back(svm_score(ev.model, test_nmc[i]));
    pred_mc.push_back(ev.scores_mc.back() >= 0.0);
    pred_nmc.push_back(ev.scores_nmc.back() >= 0.0);
  }
  ev.mc = confusion_metrics(pred_mc, test_labels);
  ev.mc.auroc = auroc(ev.scores_mc, test_labels);
  ev.nmc = confusion_metrics(pred_nmc, test_labels);
  ev.nmc.auroc = auroc(ev.scores_nmc, test_labels);
  return ev;
}

}  // namespace detail

/// Fit and evaluate all configured classifier variants from cached features;
/// writes report.csv, the two ROC figures, and the model files.
inline std::vector<ReportRow> classifier_stage(const ExperimentConfig& cfg,
                                               const std::string& run_dir_s,
                                               const std::vector<SubjectRecord>& records) {
  namespace fs = std::filesystem;
  const fs::path run_dir = run_dir_s;
  fs::create_directories(run_dir / "models");

  std::vector<ReportRow> rows;
  std::vector<detail::DepthEval> evals;
  for (const int d : cfg.depths) {
    detail::DepthEval ev = detail::evaluate_depth(cfg, run_dir, records, d, false);
    detail::atomic_write(run_dir / "models" / ("model_svm_d" + std::to_string(d) + ".json"),
                         [&](const std::string& tmp) { write_model(ev.model, tmp); });
    rows.push_back({cfg.tracer_analog, std::to_string(d), "MC", ev.mc});
    rows.push_back({cfg.tracer_analog, std::to_string(d), "NMC", ev.nmc});
    evals.push_back(std::move(ev));
  }

  const int head_depth = *std::max_element(cfg.depths.begin(), cfg.depths.end());
  detail::DepthEval head_ev = detail::evaluate_depth(cfg, run_dir, records, head_depth, true);
  detail::atomic_write(run_dir / "models" / "model_head.json",
                       [&](const std::string& tmp) { write_model(head_ev.model, tmp); });
  rows.push_back({cfg.tracer_analog, "head", "MC", head_ev.mc});
  rows.push_back({cfg.tracer_analog, "head", "NMC", head_ev.nmc});

  detail::atomic_write(run_dir / "report.csv", [&](const std::string& tmp) {
    std::ofstream os(tmp);
    os << format_report_csv(rows);
    if (!os) throw std::runtime_error("cannot write " + tmp);
  });

  // ROC figures: the best-MC-accuracy SVM depth and the head baseline.
  std::size_t best = 0;
  for (std::size_t i = 1; i < evals.size(); ++i)
    if (evals[i].mc.accuracy > evals[best].mc.accuracy) best = i;
  char label[64];
  {
    std::vector<RocCurve> curves;
    std::snprintf(label, sizeof label, "MC (AUROC %.3f)", evals[best].mc.auroc);
    curves.push_back({label, roc_points(evals[best].scores_mc, evals[best].labels)});
    std::snprintf(label, sizeof label, "NMC (AUROC %.3f)", evals[best].nmc.auroc);
    curves.push_back({label, roc_points(evals[best].scores_nmc, evals[best].labels)});
    detail::atomic_write(run_dir / "roc_svm.svg",
                         [&](const std::string& tmp) { emit_roc_svg(curves, tmp); });
  }
  {
    std::vector<RocCurve> curves;
    std::snprintf(label, sizeof label, "MC (AUROC %.3f)", head_ev.mc.auroc);
    curves.push_back({label, roc_points(head_ev.scores_mc, head_ev.labels)});
    std::snprintf(label, sizeof label, "NMC (AUROC %.3f)", head_ev.nmc.auroc);
    curves.push_back({label, roc_points(head_ev.scores_nmc, head_ev.labels)});
    detail::atomic_write(run_dir / "roc_head.svg",
                         [&](const std::string& tmp) { emit_roc_svg(curves, tmp); });
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Run orchestration.
// ---------------------------------------------------------------------------

struct RunResult {
  std::string run_dir;
  std::vector<ReportRow> rows;
  double wall_seconds = 0.0;
};

namespace detail {

inline nlohmann::json subjects_json(const std::vector<SubjectRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const SubjectRecord& rec : records) {
    nlohmann::json j;
    j["id"] = rec.id;
    j["split"] = to_string(rec.split);
    j["label"] = to_string(rec.label);
    j["seed"] = rec.seed;
    j["motion_target_mm"] = rec.motion_target_mm;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline std::vector<SubjectRecord> subjects_from_json(const nlohmann::json& arr) {
  std::vector<SubjectRecord> records;
  for (const auto& j : arr) {
    SubjectRecord rec;
    rec.id = j.at("id").get<std::string>();
    const std::string split = j.at("split").get<std::string>();
    rec.split = (split == "train") ? Split::train : (split == "val") ? Split::val : Split::test;
    rec.label = label_from_string(j.at("label").get<std::string>());
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.motion_target_mm = j.at("motion_target_mm").get<double>();
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

/// Verify a run directory's manifest against the config; error on mismatch.
/// Returns the stored subject list, or creates the manifest for a new run.
inline std::vector<SubjectRecord> prepare_run_dir(const ExperimentConfig& cfg,
                                                  const std::string& run_dir_s) {
  namespace fs = std::filesystem;
  const fs::path run_dir = run_dir_s;
  const fs::path manifest_path = run_dir / "manifest.json";
  const std::string hash = detail::hash_hex(config_hash(cfg));

  if (fs::exists(manifest_path)) {
    std::ifstream is(manifest_path);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception&) {
      throw std::runtime_error("manifest.json in " + run_dir_s + " is corrupt");
    }
    const std::string stored = j.at("config_hash").get<std::string>();
    if (stored != hash)
      throw ConfigError("config hash mismatch for " + run_dir_s + ": run was created with hash " +
                        stored + ", current config hashes to " + hash +
                        " (use a fresh output directory)");
    return detail::subjects_from_json(j.at("subjects"));
  }

  fs::create_directories(run_dir);
  const auto records = make_cohort(cfg.counts, cfg.motion_mean_mm, cfg.motion_std_mm, cfg.master_seed);
  nlohmann::json j;
  j["tool"] = "petmc";
  j["version"] = kToolVersion;
  j["config_hash"] = hash;
  j["config"] = dump_config(cfg);
  j["master_seed"] = cfg.master_seed;
  j["subjects"] = detail::subjects_json(records);
  j["completed"] = false;
  detail::atomic_write(manifest_path, [&](const std::string& tmp) {
    std::ofstream os(tmp);
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("cannot write " + tmp);
  });
  return records;
}

/// Full experiment: cohort, per-subject stages under a worker pool, then the
/// classifier stage and the finalized manifest.
inline RunResult run_pipeline(const ExperimentConfig& cfg, int workers = 0) {
  namespace fs = std::filesystem;
  validate_experiment_config(cfg);
  if (cfg.counts.train_cn + cfg.counts.val_cn < 1 || cfg.counts.train_ad + cfg.counts.val_ad < 1)
    throw ConfigError("config: training split needs at least one subject of each class");
  if (cfg.counts.test_cn < 1 || cfg.counts.test_ad < 1)
    throw ConfigError("config: test split needs at least one subject of each class");

  const auto t0 = std::chrono::steady_clock::now();
  const fs::path run_dir = cfg.out_dir;
  const std::vector<SubjectRecord> records = prepare_run_dir(cfg, cfg.out_dir);

  int n_workers = workers;
  if (n_workers <= 0) n_workers = static_cast<int>(std::thread::hardware_concurrency());
  if (n_workers < 1) n_workers = 1;
  n_workers = std::min<int>(n_workers, static_cast<int>(records.size()));

  detail::StageClock clock;
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::vector<std::string> errors;
  std::mutex log_mutex;

  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      try {
        detail::process_subject(cfg, records[i], run_dir, clock);
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cout << "[petmc] subject " << records[i].id << " done (" << (i + 1) << "/"
                  << records.size() << ")\n";
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        errors.push_back(records[i].id + ": " + e.what());
      }
    }
  };

  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int k = 0; k < n_workers; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (!errors.empty()) {
    std::string msg = "pipeline stage failures:";
    for (const std::string& e : errors) msg += "\n  " + e;
    throw std::runtime_error(msg);
  }

  RunResult result;
  result.run_dir = cfg.out_dir;
  result.rows = classifier_stage(cfg, cfg.out_dir, records);
  result.wall_seconds = detail::seconds_since(t0);

  // Finalize the manifest with wall-times and per-subject motion summaries.
  const fs::path manifest_path = run_dir / "manifest.json";
  std::ifstream is(manifest_path);
  nlohmann::json j;
  is >> j;
  is.close();
  const auto head_points = default_head_points();
  for (auto& sj : j.at("subjects")) {
    const detail::SubjectPaths paths(run_dir, sj.at("id").get<std::string>());
    const MotionTrace trace = read_trace_csv(paths.trace.string(), cfg.scan_duration_s);
    sj["motion_magnitude_mm"] = motion_magnitude(trace, head_points);
  }
  j["stage_seconds"] = {{"phantom", clock.phantom_s},
                        {"trace", clock.trace_s},
                        {"simulate", clock.simulate_s},
                        {"recon", clock.recon_s},
                        {"features", clock.features_s}};
  j["wall_seconds"] = result.wall_seconds;
  j["workers"] = n_workers;
  j["completed"] = true;
  detail::atomic_write(manifest_path, [&](const std::string& tmp) {
    std::ofstream os(tmp);
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("cannot write " + tmp);
  });
  return result;
}

/// Human-readable Table-2-shaped matrix from a completed run's report.csv;
/// writes report.txt next to it and returns the text.
inline std::string report_table(const std::string& run_dir_s) {
  namespace fs = std::filesystem;
  const fs::path csv_path = fs::path(run_dir_s) / "report.csv";
  if (!fs::exists(csv_path))
    throw std::runtime_error("missing stage output: " + csv_path.string() +
                             " (complete the run first)");
  std::ifstream is(csv_path);
  std::string line;
  std::getline(is, line);
  struct Cell {
    MetricsReport mc, nmc;
    bool has_mc = false, has_nmc = false;
  };
  std::vector<std::pair<std::string, Cell>> variants;
  std::string tracer;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto parts = detail::split(line, ',');
    if (parts.size() != 8) throw std::runtime_error("report.csv is malformed: " + line);
    tracer = parts[0];
    const std::string variant = parts[1] == "head" ? "head" : "svm_d" + parts[1];
    MetricsReport m;
    m.accuracy = std::stod(parts[3]);
    m.precision = std::stod(parts[4]);
    m.recall = std::stod(parts[5]);
    m.f1 = std::stod(parts[6]);
    m.auroc = std::stod(parts[7]);
    auto it = std::find_if(variants.begin(), variants.end(),
                           [&](const auto& v) { return v.first == variant; });
    if (it == variants.end()) {
      variants.push_back({variant, Cell{}});
      it = std::prev(variants.end());
    }
    if (parts[2] == "MC") {
      it->second.mc = m;
      it->second.has_mc = true;
    } else {
      it->second.nmc = m;
      it->second.has_nmc = true;
    }
  }
  if (variants.empty()) throw std::runtime_error("report.csv has no rows");

  std::string best_variant;
  double best_acc = -1.0;
  for (const auto& [name, cell] : variants)
    if (name != "head" && cell.has_mc && cell.mc.accuracy > best_acc) {
      best_acc = cell.mc.accuracy;
      best_variant = name;
    }

  std::ostringstream os;
  char buf[256];
  os << "tracer analog: " << tracer << "\n\n";
  std::snprintf(buf, sizeof buf, "%-10s %9s %9s %9s %9s %9s %9s %9s %9s %9s %9s\n", "variant",
                "acc MC", "acc NMC", "prec MC", "prec NMC", "rec MC", "rec NMC", "f1 MC", "f1 NMC",
                "auc MC", "auc NMC");
  os << buf;
  for (const auto& [name, cell] : variants) {
    std::snprintf(buf, sizeof buf,
                  "%-10s %9.3f %9.3f %9.3f %9.3f %9.3f %9.3f %9.3f %9.3f %9.3f %9.3f%s\n",
                  name.c_str(), cell.mc.accuracy, cell.nmc.accuracy, cell.mc.precision,
                  cell.nmc.precision, cell.mc.recall, cell.nmc.recall, cell.mc.f1, cell.nmc.f1,
                  cell.mc.auroc, cell.nmc.auroc, name == best_variant ? "  *" : "");
    os << buf;
  }
  os << "\n* best MC accuracy\n";

  const std::string text = os.str();
  detail::atomic_write(fs::path(run_dir_s) / "report.txt", [&](const std::string& tmp) {
    std::ofstream out(tmp);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + tmp);
  });
  return text;
}

}  // namespace petmc

#endif  // PETMC_PIPELINE_HPP
