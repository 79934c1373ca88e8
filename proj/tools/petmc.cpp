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

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "petmc/config.hpp"
#include "petmc/pipeline.hpp"

namespace {

petmc::ExperimentConfig load_cfg(const std::string& config_path, bool smoke) {
  petmc::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = petmc::load_config(config_path);
  if (smoke) petmc::apply_smoke_overrides(cfg);
  petmc::validate_experiment_config(cfg);
  return cfg;
}

void print_metrics(const char* tag, const petmc::MetricsReport& m) {
  std::printf("%s accuracy=%.6f precision=%.6f recall=%.6f f1=%.6f auroc=%.6f\n", tag, m.accuracy,
              m.precision, m.recall, m.f1, m.auroc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"petmc: PET motion-degradation study pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_path, out_mu_path, run_dir;
  std::string activity_path, mu_path, trace_path, events_path, volume_path, model_path;
  std::string label_str = "CN", subject_id = "subject";
  std::uint64_t seed = 1;
  double target_mm = 5.0;
  int depth = 4, workers = 0;
  bool smoke = false, head = false, train_on_nmc = false;

  auto* c_phantom = app.add_subcommand("phantom", "generate one phantom pair");
  c_phantom->add_option("--config", config_path);
  c_phantom->add_option("--label", label_str, "CN or AD");
  c_phantom->add_option("--seed", seed);
  c_phantom->add_option("--out-activity", activity_path)->required();
  c_phantom->add_option("--out-mu", out_mu_path)->required();

  auto* c_trace = app.add_subcommand("trace", "generate one calibrated motion trace");
  c_trace->add_option("--config", config_path);
  c_trace->add_option("--target-mm", target_mm);
  c_trace->add_option("--seed", seed);
  c_trace->add_option("--out", out_path)->required();

  auto* c_sim = app.add_subcommand("simulate", "simulate a list-mode acquisition");
  c_sim->add_option("--config", config_path);
  c_sim->add_option("--activity", activity_path)->required();
  c_sim->add_option("--mu", mu_path)->required();
  c_sim->add_option("--trace", trace_path)->required();
  c_sim->add_option("--seed", seed);
  c_sim->add_option("--out", out_path)->required();

  auto* c_recon = app.add_subcommand("recon", "list-mode OSEM reconstruction");
  c_recon->add_option("--config", config_path);
  c_recon->add_option("--events", events_path)->required();
  c_recon->add_option("--mu", mu_path)->required();
  c_recon->add_option("--trace", trace_path, "motion trace; omit for NMC");
  c_recon->add_option("--seed", seed);
  c_recon->add_option("--out", out_path)->required();

  auto* c_extract = app.add_subcommand("extract", "encoder features from a volume");
  c_extract->add_option("--config", config_path);
  c_extract->add_option("--volume", volume_path)->required();
  c_extract->add_option("--depth", depth)->check(CLI::Range(1, 4));
  c_extract->add_option("--subject-id", subject_id);
  c_extract->add_option("--label", label_str);
  c_extract->add_option("--out", out_path)->required();

  auto* c_train = app.add_subcommand("train", "fit a classifier from cached run features");
  c_train->add_option("--config", config_path);
  c_train->add_option("--run", run_dir)->required();
  c_train->add_option("--depth", depth)->check(CLI::Range(1, 4));
  c_train->add_flag("--head", head, "logistic head instead of the SVM");
  c_train->add_option("--out", out_path)->required();

  auto* c_eval = app.add_subcommand("evaluate", "evaluate a model on a run's test split");
  c_eval->add_option("--config", config_path);
  c_eval->add_option("--run", run_dir)->required();
  c_eval->add_option("--model", model_path)->required();

  auto* c_ablate = app.add_subcommand("ablate", "redo the classifier stage from cached features");
  c_ablate->add_option("--config", config_path);
  c_ablate->add_option("--run", run_dir)->required();
  c_ablate->add_flag("--smoke", smoke);

  auto* c_report = app.add_subcommand("report", "print the report table for a completed run");
  c_report->add_option("--run", run_dir)->required();

  auto* c_run = app.add_subcommand("run", "full experiment pipeline");
  c_run->add_option("--config", config_path);
  c_run->add_option("--out", out_path, "output directory (overrides config)");
  c_run->add_option("--workers", workers, "worker threads (0 = hardware)");
  c_run->add_flag("--smoke", smoke, "reduced smoke-scale preset");
  c_run->add_flag("--train-on-nmc", train_on_nmc, "also train on NMC images");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_phantom) {
      const auto cfg = load_cfg(config_path, false);
      const auto [activity, mu] =
          petmc::make_phantom(cfg.phantom, petmc::label_from_string(label_str), seed,
                              cfg.recon.grid_dims, cfg.recon.grid_voxel_mm);
      petmc::write_volume(activity, activity_path);
      petmc::write_volume(mu, out_mu_path);
    } else if (*c_trace) {
      const auto cfg = load_cfg(config_path, false);
      const auto points = petmc::default_head_points();
      const double amp = petmc::calibrate_trace_amplitude(
          cfg.trace_kind, target_mm, cfg.trace_segments, cfg.scan_duration_s, seed, points);
      const petmc::MotionTrace trace =
          petmc::gen_trace(cfg.trace_kind, amp, cfg.trace_segments, cfg.scan_duration_s, seed);
      petmc::write_trace_csv(trace, out_path);
      std::printf("amplitude_mm=%.6f magnitude_mm=%.6f\n", amp,
                  petmc::motion_magnitude(trace, points));
    } else if (*c_sim) {
      const auto cfg = load_cfg(config_path, false);
      const auto activity = petmc::read_volume(activity_path);
      const auto mu = petmc::read_volume(mu_path);
      const auto trace = petmc::read_trace_csv(trace_path, cfg.scan_duration_s);
      const auto stream = petmc::simulate_listmode(activity, mu, trace, cfg.scanner,
                                                   cfg.events_per_subject, seed);
      petmc::write_listmode(stream, out_path);
      std::printf("events=%zu emitted=%llu\n", stream.events.size(),
                  static_cast<unsigned long long>(stream.true_emission_count));
    } else if (*c_recon) {
      const auto cfg = load_cfg(config_path, false);
      const auto stream = petmc::read_listmode(events_path);
      const auto mu = petmc::read_volume(mu_path);
      petmc::MotionTrace trace;
      const petmc::MotionTrace* trace_ptr = nullptr;
      if (!trace_path.empty()) {
        trace = petmc::read_trace_csv(trace_path, stream.duration_s);
        trace_ptr = &trace;
      }
      const auto img =
          petmc::osem_listmode(stream, cfg.scanner, mu, trace_ptr, cfg.recon, seed, nullptr);
      petmc::write_volume(img, out_path);
    } else if (*c_extract) {
      const auto cfg = load_cfg(config_path, false);
      const auto vol = petmc::read_volume(volume_path);
      const std::array<int, 3> cube{cfg.encoder.input_dim, cfg.encoder.input_dim,
                                    cfg.encoder.input_dim};
      const auto stages = petmc::encode(petmc::resample(vol, cube), cfg.encoder);
      petmc::FeatureRecord rec;
      rec.subject_id = subject_id;
      rec.label = petmc::label_from_string(label_str);
      rec.depth = depth;
      rec.values = petmc::reduce_maxpool(stages[static_cast<std::size_t>(depth - 1)]);
      petmc::write_feature_csv(rec, out_path);
    } else if (*c_train) {
      const auto cfg = load_cfg(config_path, false);
      const auto records = petmc::prepare_run_dir(cfg, run_dir);
      const auto ev = petmc::detail::evaluate_depth(cfg, run_dir, records, depth, head);
      petmc::write_model(ev.model, out_path);
      print_metrics("test MC ", ev.mc);
      print_metrics("test NMC", ev.nmc);
    } else if (*c_eval) {
      const auto cfg = load_cfg(config_path, false);
      const auto records = petmc::prepare_run_dir(cfg, run_dir);
      const auto model = petmc::read_model(model_path);
      std::vector<double> scores_mc, scores_nmc;
      std::vector<bool> pred_mc, pred_nmc, labels;
      for (const auto& rec : records) {
        if (rec.split != petmc::Split::test) continue;
        const auto fmc = petmc::detail::load_features_for(run_dir, rec.id, "mc", model.depth);
        const auto fnmc = petmc::detail::load_features_for(run_dir, rec.id, "nmc", model.depth);
        scores_mc.push_back(petmc::svm_score(model, fmc));
        scores_nmc.push_back(petmc::svm_score(model, fnmc));
        pred_mc.push_back(scores_mc.back() >= 0.0);
        pred_nmc.push_back(scores_nmc.back() >= 0.0);
        labels.push_back(rec.label == petmc::Label::AD);
      }
      auto mc = petmc::confusion_metrics(pred_mc, labels);
      mc.auroc = petmc::auroc(scores_mc, labels);
      auto nmc = petmc::confusion_metrics(pred_nmc, labels);
      nmc.auroc = petmc::auroc(scores_nmc, labels);
      print_metrics("test MC ", mc);
      print_metrics("test NMC", nmc);
    } else if (*c_ablate) {
      const auto cfg = load_cfg(config_path, smoke);
      const auto records = petmc::prepare_run_dir(cfg, run_dir);
      petmc::classifier_stage(cfg, run_dir, records);
      std::cout << petmc::report_table(run_dir);
    } else if (*c_report) {
      std::cout << petmc::report_table(run_dir);
    } else if (*c_run) {
      auto cfg = load_cfg(config_path, smoke);
      if (!out_path.empty()) cfg.out_dir = out_path;
      if (train_on_nmc) cfg.train_on_nmc = true;
      const auto result = petmc::run_pipeline(cfg, workers);
      std::cout << petmc::report_table(result.run_dir);
      std::printf("run complete in %.1f s: %s\n", result.wall_seconds, result.run_dir.c_str());
    }
  } catch (const petmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
