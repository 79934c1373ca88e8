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

#ifndef PETMC_METRICS_HPP
#define PETMC_METRICS_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace petmc {

/// Confusion-derived metrics plus AUROC; the positive class is AD.
struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auroc = 0.0;
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Confusion metrics with the zero-denominator conventions fixed to 0.
/// AUROC is left at 0; fill it separately from scores.
inline MetricsReport confusion_metrics(const std::vector<bool>& predicted_ad,
                                       const std::vector<bool>& label_ad) {
  if (predicted_ad.empty() || predicted_ad.size() != label_ad.size())
    throw std::invalid_argument("confusion_metrics: empty input or length mismatch");
  MetricsReport r;
  for (std::size_t i = 0; i < predicted_ad.size(); ++i) {
    if (label_ad[i])
      (predicted_ad[i] ? r.tp : r.fn)++;
    else
      (predicted_ad[i] ? r.fp : r.tn)++;
  }
  const double n = static_cast<double>(predicted_ad.size());
  r.accuracy = static_cast<double>(r.tp + r.tn) / n;
  r.precision = (r.tp + r.fp > 0) ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  r.recall = (r.tp + r.fn > 0) ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.f1 = (r.precision + r.recall > 0.0) ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

/// Mann-Whitney AUROC: P(score+ > score-) + 0.5 P(tie), via rank summation
/// with average ranks for ties.
inline double auroc(const std::vector<double>& scores, const std::vector<bool>& label_ad) {
  if (scores.empty() || scores.size() != label_ad.size())
    throw std::invalid_argument("auroc: empty input or length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (const bool l : label_ad) n_pos += l ? 1u : 0u;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auroc: both classes required");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (label_ad[order[k]]) rank_sum_pos += avg_rank;
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// ROC curve from a descending threshold sweep over the distinct scores
/// (predict AD iff score >= threshold). Starts at (0,0), ends at (1,1).
inline std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                         const std::vector<bool>& label_ad) {
  if (scores.empty() || scores.size() != label_ad.size())
    throw std::invalid_argument("roc_points: empty input or length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (const bool l : label_ad) n_pos += l ? 1u : 0u;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("roc_points: both classes required");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k)
      (label_ad[order[k]] ? tp : fp)++;
    pts.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                     static_cast<double>(tp) / static_cast<double>(n_pos));
    i = j;
  }
  return pts;
}

inline double trapezoid_area(const std::vector<std::pair<double, double>>& pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += 0.5 * (pts[i].second + pts[i - 1].second) * (pts[i].first - pts[i - 1].first);
  return area;
}

struct RocCurve {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

/// Standalone SVG with one polyline per curve plus the chance diagonal.
inline void emit_roc_svg(const std::vector<RocCurve>& curves, const std::string& path) {
  const int size = 420, margin = 50;
  const double span = size - 2.0 * margin;
  const auto px = [&](double x) { return margin + x * span; };
  const auto py = [&](double y) { return size - margin - y * span; };
  static const char* palette[] = {"#1b6ca8", "#d1495b", "#3a7d44", "#8d5a97"};

  std::ofstream os(path);
  if (!os) throw std::runtime_error("emit_roc_svg: cannot open " + path);
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
     << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
  os << "<rect width=\"" << size << "\" height=\"" << size << "\" fill=\"white\"/>\n";
  os << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(0)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0) << "\" y2=\"" << py(1)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(1)
     << "\" stroke=\"#999\" stroke-dasharray=\"6,4\"/>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    os << "<polyline fill=\"none\" stroke=\"" << palette[c % 4] << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : curves[c].points) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << (size - margin - 120) << "\" y=\"" << (margin + 18 + 18 * c)
       << "\" font-family=\"sans-serif\" font-size=\"13\" fill=\"" << palette[c % 4] << "\">"
       << curves[c].label << "</text>\n";
  }
  os << "<text x=\"" << (size / 2 - 60) << "\" y=\"" << (size - 12)
     << "\" font-family=\"sans-serif\" font-size=\"13\">False positive rate</text>\n";
  os << "<text x=\"14\" y=\"" << (size / 2 + 50)
     << "\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 14 " << (size / 2 + 50)
     << ")\">True positive rate</text>\n";
  os << "</svg>\n";
  if (!os) throw std::runtime_error("emit_roc_svg: write failed for " + path);
}

}  // namespace petmc

#endif  // PETMC_METRICS_HPP
