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

#ifndef PETMC_CONFIG_HPP
#define PETMC_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "petmc/features.hpp"
#include "petmc/motion.hpp"
#include "petmc/phantom.hpp"
#include "petmc/recon.hpp"
#include "petmc/simulate.hpp"

namespace petmc {

/// Raised for malformed configuration (unknown keys, bad values); the CLI
/// maps it to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ExperimentConfig {
  // exper
  std::uint64_t master_seed = 20260801;
  CohortCounts counts;
  std::string tracer_analog = "focal";
  std::vector<int> depths{1, 2, 3, 4};
  std::string out_dir = "runs/default";
  bool train_on_nmc = false;
  // phantom
  PhantomParams phantom;
  // motion
  TraceKind trace_kind = TraceKind::mixed;
  int trace_segments = 12;
  double scan_duration_s = 600.0;
  double motion_mean_mm = 7.0;
  double motion_std_mm = 2.5;
  // simulate
  ScannerGeometry scanner;
  std::uint64_t events_per_subject = 100000;
  // recon
  ReconConfig recon;
  // features
  EncoderConfig encoder;
  // classify
  double svm_c = 1.0;
  double svm_tol = 1e-6;
  int svm_max_epochs = 2000;
  double head_lr = 0.5;
  int head_epochs = 500;
};

namespace detail {

inline double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for " + key + ": '" + s + "'");
  }
}

inline long long to_int(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer value for " + key + ": '" + s + "'");
  }
}

inline std::uint64_t to_u64(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad unsigned value for " + key + ": '" + s + "'");
  }
}

inline bool to_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config: bad boolean value for " + key + ": '" + s + "'");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, sep)) parts.push_back(cur);
  return parts;
}

inline std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline Vec3 to_vec3(const std::string& s, const std::string& key) {
  const auto parts = split(s, ',');
  if (parts.size() != 3) throw ConfigError("config: " + key + " needs three comma-separated values");
  return {to_double(trim(parts[0]), key), to_double(trim(parts[1]), key), to_double(trim(parts[2]), key)};
}

}  // namespace detail

/// The two built-in disease presets. The focal preset concentrates the
/// deficit in two temporal cortex patches; the diffuse preset spreads a
/// weaker deficit over large bilateral regions.
inline void apply_tracer_preset(ExperimentConfig& cfg) {
  if (cfg.tracer_analog == "focal") {
    cfg.phantom.ad_regions = {{{52.0, -30.0, -26.0}, {16.0, 22.0, 20.0}},
                              {{-52.0, -30.0, -26.0}, {16.0, 22.0, 20.0}}};
    cfg.phantom.ad_reduction = 0.2;
  } else if (cfg.tracer_analog == "diffuse") {
    cfg.phantom.ad_regions = {{{30.0, -20.0, -10.0}, {34.0, 44.0, 40.0}},
                              {{-30.0, -20.0, -10.0}, {34.0, 44.0, 40.0}}};
    cfg.phantom.ad_reduction = 0.12;
  } else {
    throw ConfigError("config: unknown tracer_analog '" + cfg.tracer_analog + "'");
  }
}

/// Smoke profile: 16 subjects (train 4+4, test 4+4), 32-cube grid,
/// 2e4 events per subject. Keeps the full report structure at a fraction of
/// the runtime.
inline void apply_smoke_overrides(ExperimentConfig& cfg) {
  cfg.counts = CohortCounts{4, 4, 0, 0, 4, 4};
  cfg.events_per_subject = 20000;
  cfg.recon.grid_dims = {32, 32, 32};
  cfg.recon.grid_voxel_mm = {6.0, 6.0, 6.0};
  cfg.recon.sensitivity_lors = 50000;
  cfg.encoder.input_dim = 32;
  cfg.trace_segments = 8;
  cfg.out_dir = "runs/smoke";
}

inline void validate_experiment_config(const ExperimentConfig& cfg) {
  validate_phantom_params(cfg.phantom);
  validate_recon_config(cfg.recon);
  validate_encoder_config(cfg.encoder);
  if (cfg.depths.empty()) throw ConfigError("config: depths must be nonempty");
  for (const int d : cfg.depths)
    if (d < 1 || d > 4) throw ConfigError("config: depths must be within 1..4");
  if (cfg.counts.train_cn < 0 || cfg.counts.train_ad < 0 || cfg.counts.val_cn < 0 ||
      cfg.counts.val_ad < 0 || cfg.counts.test_cn < 0 || cfg.counts.test_ad < 0)
    throw ConfigError("config: cohort counts must be >= 0");
  if (cfg.trace_segments < 1) throw ConfigError("config: motion segments must be >= 1");
  if (!(cfg.scan_duration_s > 0.0)) throw ConfigError("config: duration must be positive");
  if (cfg.motion_mean_mm < 0.0 || cfg.motion_std_mm < 0.0)
    throw ConfigError("config: motion targets must be >= 0");
  if (cfg.motion_mean_mm > 0.0 && cfg.trace_kind != TraceKind::none && cfg.trace_segments < 2)
    throw ConfigError("config: motion needs at least 2 segments");
  if (!(cfg.scanner.radius_mm > 0.0) || !(cfg.scanner.axial_halflength_mm > 0.0))
    throw ConfigError("config: scanner dimensions must be positive");
  if (!(cfg.svm_c > 0.0) || !(cfg.svm_tol > 0.0) || cfg.svm_max_epochs < 1)
    throw ConfigError("config: bad svm settings");
  if (!(cfg.head_lr > 0.0) || cfg.head_epochs < 1) throw ConfigError("config: bad head settings");
}

/// Flat-sectioned key=value format, sections named after modules. Unknown
/// sections or keys are rejected.
inline ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::string section;
  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  bool ad_regions_explicit = false, ad_reduction_explicit = false, tracer_explicit = false;
  std::string pending_tracer;

  auto fail = [&](const std::string& msg) {
    throw ConfigError("config line " + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "exper" && section != "phantom" && section != "motion" && section != "simulate" &&
          section != "recon" && section != "features" && section != "classify")
        fail("unknown section [" + section + "]");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (section.empty()) fail("key outside any section");
    const std::string qkey = section + "." + key;

    if (section == "exper") {
      if (key == "master_seed") cfg.master_seed = detail::to_u64(val, qkey);
      else if (key == "train_cn") cfg.counts.train_cn = static_cast<int>(detail::to_int(val, qkey));
      else if (key == "train_ad") cfg.counts.train_ad = static_cast<int>(detail::to_int(val, qkey));
      else if (key == "val_cn") cfg.counts.val_cn = static_cast<int>(detail::to_int(val, qkey));
      else if (key == "val_ad") cfg.counts.val_ad = static_cast<int>(detail::to_int(val, qkey));
      else if (key == "test_cn") cfg.counts.test_cn = static_cast<int>(detail::to_int(val, qkey));
      else if (key == "test_ad") cfg.counts.test_ad = static_cast<int>(detail::to_int(val, qkey));
      else if (key == "tracer_analog") { pending_tracer = val; tracer_explicit = true; }
      else if (key == "depths") {
        cfg.depths.clear();
        for (const auto& part : detail::split(val, ','))
          cfg.depths.push_back(static_cast<int>(detail::to_int(detail::trim(part), qkey)));
      }
      else if (key == "out_dir") cfg.out_dir = val;
      else if (key == "train_on_nmc") cfg.train_on_nmc = detail::to_bool(val, qkey);
      else fail("unknown key " + qkey);
    } else if (section == "phantom") {
      if (key == "brain_radii_mm") cfg.phantom.brain_radii_mm = detail::to_vec3(val, qkey);
      else if (key == "cortex_thickness_mm") cfg.phantom.cortex_thickness_mm = detail::to_double(val, qkey);
      else if (key == "gray_white_ratio") cfg.phantom.gray_white_ratio = detail::to_double(val, qkey);
      else if (key == "ad_reduction") { cfg.phantom.ad_reduction = detail::to_double(val, qkey); ad_reduction_explicit = true; }
      else if (key == "subject_jitter") cfg.phantom.subject_jitter = detail::to_double(val, qkey);
      else if (key == "mu_per_mm") cfg.phantom.mu_tissue_per_mm = detail::to_double(val, qkey);
      else if (key == "ad_regions") {
        cfg.phantom.ad_regions.clear();
        for (const auto& spec : detail::split(val, ';')) {
          const auto nums = detail::split(detail::trim(spec), ',');
          if (nums.size() != 6) fail("ad_regions entries need cx,cy,cz,rx,ry,rz");
          AdRegion r;
          for (int k = 0; k < 3; ++k) r.center_mm[k] = detail::to_double(detail::trim(nums[k]), qkey);
          for (int k = 0; k < 3; ++k) r.radii_mm[k] = detail::to_double(detail::trim(nums[k + 3]), qkey);
          cfg.phantom.ad_regions.push_back(r);
        }
        ad_regions_explicit = true;
      }
      else fail("unknown key " + qkey);
    } else if (section == "motion") {
      if (key == "kind") {
        try { cfg.trace_kind = trace_kind_from_string(val); }
        catch (const std::invalid_argument& e) { fail(e.what()); }
      }
      else if (key == "segments") cfg.trace_segments = static_cast<int>(detail::to_int(val, qkey));
      else if (key == "duration_s") cfg.scan_duration_s = detail::to_double(val, qkey);
      else if (key == "target_mean_mm") cfg.motion_mean_mm = detail::to_double(val, qkey);
      else if (key == "target_std_mm") cfg.motion_std_mm = detail::to_double(val, qkey);
      else fail("unknown key " + qkey);
    } else if (section == "simulate") {
      if (key == "scanner_radius_mm") cfg.scanner.radius_mm = detail::to_double(val, qkey);
      else if (key == "axial_halflength_mm") cfg.scanner.axial_halflength_mm = detail::to_double(val, qkey);
      else if (key == "events_per_subject") cfg.events_per_subject = detail::to_u64(val, qkey);
      else fail("unknown key " + qkey);
    } else if (section == "recon") {
      if (key == "iterations") cfg.recon.iterations = static_cast<int>(detail::to_int(val, qkey));
      else if (key == "subsets") cfg.recon.subsets = static_cast<int>(detail::to_int(val, qkey));
      else if (key == "psf_fwhm_mm") cfg.recon.psf_fwhm_mm = detail::to_double(val, qkey);
      else if (key == "grid_dim") {
        const int d = static_cast<int>(detail::to_int(val, qkey));
        cfg.recon.grid_dims = {d, d, d};
      }
      else if (key == "voxel_mm") {
        const double v = detail::to_double(val, qkey);
        cfg.recon.grid_voxel_mm = {v, v, v};
      }
      else if (key == "sensitivity_lors") cfg.recon.sensitivity_lors = static_cast<int>(detail::to_int(val, qkey));
      else if (key == "epsilon") cfg.recon.epsilon = detail::to_double(val, qkey);
      else fail("unknown key " + qkey);
    } else if (section == "features") {
      if (key == "seed") cfg.encoder.seed = detail::to_u64(val, qkey);
      else if (key == "input_dim") cfg.encoder.input_dim = static_cast<int>(detail::to_int(val, qkey));
      else if (key == "norm_epsilon") cfg.encoder.norm_epsilon = detail::to_double(val, qkey);
      else fail("unknown key " + qkey);
    } else if (section == "classify") {
      if (key == "c") cfg.svm_c = detail::to_double(val, qkey);
      else if (key == "tol") cfg.svm_tol = detail::to_double(val, qkey);
      else if (key == "max_epochs") cfg.svm_max_epochs = static_cast<int>(detail::to_int(val, qkey));
      else if (key == "head_lr") cfg.head_lr = detail::to_double(val, qkey);
      else if (key == "head_epochs") cfg.head_epochs = static_cast<int>(detail::to_int(val, qkey));
      else fail("unknown key " + qkey);
    }
  }

  if (tracer_explicit) cfg.tracer_analog = pending_tracer;
  {
    const double keep_reduction = cfg.phantom.ad_reduction;
    const auto keep_regions = cfg.phantom.ad_regions;
    apply_tracer_preset(cfg);
    if (ad_reduction_explicit) cfg.phantom.ad_reduction = keep_reduction;
    if (ad_regions_explicit) cfg.phantom.ad_regions = keep_regions;
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

/// Canonical text form: every field in fixed order, full precision. Used
/// for the config echo in manifests and as the hashing preimage.
inline std::string dump_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "[exper]\n";
  os << "master_seed = " << cfg.master_seed << '\n';
  os << "train_cn = " << cfg.counts.train_cn << '\n';
  os << "train_ad = " << cfg.counts.train_ad << '\n';
  os << "val_cn = " << cfg.counts.val_cn << '\n';
  os << "val_ad = " << cfg.counts.val_ad << '\n';
  os << "test_cn = " << cfg.counts.test_cn << '\n';
  os << "test_ad = " << cfg.counts.test_ad << '\n';
  os << "tracer_analog = " << cfg.tracer_analog << '\n';
  os << "depths = ";
  for (std::size_t i = 0; i < cfg.depths.size(); ++i) os << (i ? "," : "") << cfg.depths[i];
  os << '\n';
  os << "train_on_nmc = " << (cfg.train_on_nmc ? "true" : "false") << '\n';
  os << "[phantom]\n";
  os << "brain_radii_mm = " << cfg.phantom.brain_radii_mm[0] << ',' << cfg.phantom.brain_radii_mm[1]
     << ',' << cfg.phantom.brain_radii_mm[2] << '\n';
  os << "cortex_thickness_mm = " << cfg.phantom.cortex_thickness_mm << '\n';
  os << "gray_white_ratio = " << cfg.phantom.gray_white_ratio << '\n';
  os << "ad_reduction = " << cfg.phantom.ad_reduction << '\n';
  os << "subject_jitter = " << cfg.phantom.subject_jitter << '\n';
  os << "mu_per_mm = " << cfg.phantom.mu_tissue_per_mm << '\n';
  os << "ad_regions = ";
  for (std::size_t i = 0; i < cfg.phantom.ad_regions.size(); ++i) {
    const AdRegion& r = cfg.phantom.ad_regions[i];
    os << (i ? ";" : "") << r.center_mm[0] << ',' << r.center_mm[1] << ',' << r.center_mm[2] << ','
       << r.radii_mm[0] << ',' << r.radii_mm[1] << ',' << r.radii_mm[2];
  }
  os << '\n';
  os << "[motion]\n";
  os << "kind = " << to_string(cfg.trace_kind) << '\n';
  os << "segments = " << cfg.trace_segments << '\n';
  os << "duration_s = " << cfg.scan_duration_s << '\n';
  os << "target_mean_mm = " << cfg.motion_mean_mm << '\n';
  os << "target_std_mm = " << cfg.motion_std_mm << '\n';
  os << "[simulate]\n";
  os << "scanner_radius_mm = " << cfg.scanner.radius_mm << '\n';
  os << "axial_halflength_mm = " << cfg.scanner.axial_halflength_mm << '\n';
  os << "events_per_subject = " << cfg.events_per_subject << '\n';
  os << "[recon]\n";
  os << "iterations = " << cfg.recon.iterations << '\n';
  os << "subsets = " << cfg.recon.subsets << '\n';
  os << "psf_fwhm_mm = " << cfg.recon.psf_fwhm_mm << '\n';
  os << "grid_dim = " << cfg.recon.grid_dims[0] << '\n';
  os << "voxel_mm = " << cfg.recon.grid_voxel_mm[0] << '\n';
  os << "sensitivity_lors = " << cfg.recon.sensitivity_lors << '\n';
  os << "epsilon = " << cfg.recon.epsilon << '\n';
  os << "[features]\n";
  os << "seed = " << cfg.encoder.seed << '\n';
  os << "input_dim = " << cfg.encoder.input_dim << '\n';
  os << "norm_epsilon = " << cfg.encoder.norm_epsilon << '\n';
  os << "[classify]\n";
  os << "c = " << cfg.svm_c << '\n';
  os << "tol = " << cfg.svm_tol << '\n';
  os << "max_epochs = " << cfg.svm_max_epochs << '\n';
  os << "head_lr = " << cfg.head_lr << '\n';
  os << "head_epochs = " << cfg.head_epochs << '\n';
  return os.str();
}

/// FNV-1a over the canonical dump.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string text = dump_config(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace petmc

#endif  // PETMC_CONFIG_HPP
