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

#ifndef PETMC_CLASSIFY_HPP
#define PETMC_CLASSIFY_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace petmc {

/// Linear decision function over z-scored features; produced both by the
/// SVM trainer and by the logistic-head trainer. Zero-variance features are
/// dropped at fit time and recorded.
struct SvmModel {
  std::string kind = "svm";
  int depth = 0;
  double C = 1.0;
  std::vector<double> feature_means;
  std::vector<double> feature_stds;
  std::vector<int> dropped;
  std::vector<double> weights;
  double bias = 0.0;
};

namespace detail {

struct Standardized {
  std::vector<std::vector<double>> x;
  std::vector<double> means, stds;
  std::vector<int> dropped, kept;
};

inline Standardized fit_standardize(const std::vector<std::vector<double>>& features) {
  const std::size_t n = features.size();
  const std::size_t p = features.front().size();
  Standardized out;
  out.means.assign(p, 0.0);
  out.stds.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double sum = 0.0;
    for (const auto& f : features) sum += f[j];
    out.means[j] = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& f : features) {
      const double d = f[j] - out.means[j];
      ss += d * d;
    }
    out.stds[j] = std::sqrt(ss / static_cast<double>(n));
    if (out.stds[j] > 0.0)
      out.kept.push_back(static_cast<int>(j));
    else
      out.dropped.push_back(static_cast<int>(j));
  }
  out.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.x[i].resize(out.kept.size());
    for (std::size_t k = 0; k < out.kept.size(); ++k) {
      const std::size_t j = static_cast<std::size_t>(out.kept[k]);
      out.x[i][k] = (features[i][j] - out.means[j]) / out.stds[j];
    }
  }
  return out;
}

inline void validate_training_input(const std::vector<std::vector<double>>& features,
                                    const std::vector<int>& labels) {
  if (features.empty() || features.size() != labels.size())
    throw std::invalid_argument("train: features/labels size mismatch or empty");
  const std::size_t p = features.front().size();
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != p) throw std::invalid_argument("train: inconsistent feature lengths");
    for (const double v : features[i])
      if (!std::isfinite(v)) throw std::invalid_argument("train: non-finite feature value");
    if (labels[i] == 1)
      pos = true;
    else if (labels[i] == -1)
      neg = true;
    else
      throw std::invalid_argument("train: labels must be +1 or -1");
  }
  if (!pos || !neg) throw std::invalid_argument("train: both classes required");
}

}  // namespace detail

/// Primal soft-margin objective 0.5|w|^2 + C sum hinge on standardized data.
inline double svm_objective(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                            const std::vector<double>& w, double b, double C) {
  double obj = 0.0;
  for (const double wj : w) obj += 0.5 * wj * wj;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double s = b;
    for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[i][j];
    obj += C * std::max(0.0, 1.0 - y[i] * s);
  }
  return obj;
}

/// Deterministic full-batch subgradient descent with backtracking line
/// search; the objective is nonincreasing across epochs by construction.
inline SvmModel svm_train(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                          double C = 1.0, double tol = 1e-6, int max_epochs = 2000) {
  detail::validate_training_input(features, labels);
  if (!(C > 0.0)) throw std::invalid_argument("svm_train: C must be positive");
  detail::Standardized std_fit = detail::fit_standardize(features);
  const std::size_t p = std_fit.kept.size();
  const std::size_t n = std_fit.x.size();

  std::vector<double> w(p, 0.0);
  double b = 0.0;
  double obj = svm_objective(std_fit.x, labels, w, b, C);
  std::vector<double> gw(p), wt(p);

  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    std::fill(gw.begin(), gw.end(), 0.0);
    for (std::size_t j = 0; j < p; ++j) gw[j] = w[j];
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = b;
      for (std::size_t j = 0; j < p; ++j) s += w[j] * std_fit.x[i][j];
      if (labels[i] * s < 1.0) {
        for (std::size_t j = 0; j < p; ++j) gw[j] -= C * labels[i] * std_fit.x[i][j];
        gb -= C * labels[i];
      }
    }
    double step = 1.0;
    bool improved = false;
    for (int half = 0; half < 60; ++half, step *= 0.5) {
      for (std::size_t j = 0; j < p; ++j) wt[j] = w[j] - step * gw[j];
      const double bt = b - step * gb;
      const double cand = svm_objective(std_fit.x, labels, wt, bt, C);
      if (cand < obj) {
        const double drop = obj - cand;
        w = wt;
        b = bt;
        obj = cand;
        improved = true;
        if (drop < tol * std::max(1.0, std::abs(obj))) epoch = max_epochs;
        break;
      }
    }
    if (!improved) break;
  }

  SvmModel model;
  model.kind = "svm";
  model.C = C;
  model.feature_means = std::move(std_fit.means);
  model.feature_stds = std::move(std_fit.stds);
  model.dropped = std::move(std_fit.dropped);
  model.weights = std::move(w);
  model.bias = b;
  return model;
}

inline double svm_score(const SvmModel& model, const std::vector<double>& feature) {
  if (feature.size() != model.feature_means.size())
    throw std::invalid_argument("svm_score: feature length mismatch");
  double s = model.bias;
  std::size_t k = 0;
  for (std::size_t j = 0; j < feature.size(); ++j) {
    if (model.feature_stds[j] > 0.0) {
      s += model.weights[k] * (feature[j] - model.feature_means[j]) / model.feature_stds[j];
      ++k;
    }
  }
  return s;
}

/// AD iff score >= 0 (fixed tie convention).
inline bool svm_predict_ad(const SvmModel& model, const std::vector<double>& feature) {
  return svm_score(model, feature) >= 0.0;
}

/// Mean logistic loss over samples for a linear scorer; the head trainer's
/// objective, exposed with its gradient for direct verification.
inline double head_loss(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                        const std::vector<double>& w, double b) {
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double s = b;
    for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[i][j];
    const double m = y[i] * s;
    loss += (m > 0.0) ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
  }
  return loss / static_cast<double>(x.size());
}

inline void head_gradient(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                          const std::vector<double>& w, double b, std::vector<double>& gw, double& gb) {
  gw.assign(w.size(), 0.0);
  gb = 0.0;
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double s = b;
    for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[i][j];
    const double m = y[i] * s;
    const double sig = (m > 0.0) ? std::exp(-m) / (1.0 + std::exp(-m)) : 1.0 / (1.0 + std::exp(m));
    const double coeff = -y[i] * sig * inv_n;
    for (std::size_t j = 0; j < w.size(); ++j) gw[j] += coeff * x[i][j];
    gb += coeff;
  }
}

/// Trainable linear logistic head over pooled features, the label-supervised
/// counterpart to the SVM. Full-batch gradient descent, deterministic.
inline SvmModel head_train(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                           double lr = 0.5, int epochs = 500) {
  detail::validate_training_input(features, labels);
  if (!(lr > 0.0) || epochs < 1) throw std::invalid_argument("head_train: bad hyperparameters");
  detail::Standardized std_fit = detail::fit_standardize(features);
  const std::size_t p = std_fit.kept.size();

  std::vector<double> w(p, 0.0), gw(p);
  double b = 0.0, gb = 0.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    head_gradient(std_fit.x, labels, w, b, gw, gb);
    for (std::size_t j = 0; j < p; ++j) w[j] -= lr * gw[j];
    b -= lr * gb;
  }

  SvmModel model;
  model.kind = "head";
  model.C = 0.0;
  model.feature_means = std::move(std_fit.means);
  model.feature_stds = std::move(std_fit.stds);
  model.dropped = std::move(std_fit.dropped);
  model.weights = std::move(w);
  model.bias = b;
  return model;
}

inline void write_model(const SvmModel& model, const std::string& path) {
  nlohmann::json j;
  j["kind"] = model.kind;
  j["depth"] = model.depth;
  j["C"] = model.C;
  j["means"] = model.feature_means;
  j["stds"] = model.feature_stds;
  j["dropped"] = model.dropped;
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_model: cannot open " + path);
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("write_model: write failed for " + path);
}

inline SvmModel read_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_model: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error("read_model: corrupt file " + path);
  }
  SvmModel model;
  try {
    model.kind = j.at("kind").get<std::string>();
    model.depth = j.at("depth").get<int>();
    model.C = j.at("C").get<double>();
    model.feature_means = j.at("means").get<std::vector<double>>();
    model.feature_stds = j.at("stds").get<std::vector<double>>();
    model.dropped = j.at("dropped").get<std::vector<int>>();
    model.weights = j.at("weights").get<std::vector<double>>();
    model.bias = j.at("bias").get<double>();
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error("read_model: corrupt file " + path);
  }
  std::size_t kept = 0;
  for (const double s : model.feature_stds)
    if (s > 0.0) ++kept;
  if (model.weights.size() != kept || model.feature_stds.size() != model.feature_means.size())
    throw std::runtime_error("read_model: corrupt file " + path);
  return model;
}

}  // namespace petmc

#endif  // PETMC_CLASSIFY_HPP
