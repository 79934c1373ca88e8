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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <vector>

#include "petmc/classify.hpp"
#include "petmc/rng.hpp"

using namespace petmc;

namespace {

struct Problem {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

Problem random_problem(std::uint64_t seed, std::size_t n, std::size_t p, double sep) {
  Rng rng(seed);
  Problem pr;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = (i % 2 == 0) ? 1 : -1;
    std::vector<double> f(p);
    for (std::size_t j = 0; j < p; ++j) f[j] = rng.normal() + (j == 0 ? sep * y : 0.0);
    pr.x.push_back(std::move(f));
    pr.y.push_back(y);
  }
  return pr;
}

// standardize with the model's own statistics, keeping only nonconstant dims
std::vector<std::vector<double>> standardized_kept(const SvmModel& m,
                                                   const std::vector<std::vector<double>>& x) {
  std::vector<std::vector<double>> out;
  for (const auto& f : x) {
    std::vector<double> row;
    for (std::size_t j = 0; j < f.size(); ++j)
      if (m.feature_stds[j] > 0.0) row.push_back((f[j] - m.feature_means[j]) / m.feature_stds[j]);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

TEST_CASE("svm matches the closed-form 1d solution") {
  // two symmetric points standardize to -1 and +1, so the primal reduces to
  // f(w) = w^2/2 + 2C max(0, 1 - w) with minimizer min(2C, 1)
  const std::vector<std::vector<double>> x{{-3.0}, {5.0}};
  const std::vector<int> y{-1, 1};

  for (const double c : {0.2, 0.35, 10.0}) {
    const SvmModel m = svm_train(x, y, c, 1e-10, 20000);
    const double expect = std::min(2.0 * c, 1.0);
    REQUIRE(m.weights.size() == 1);
    REQUIRE_THAT(m.weights[0], Catch::Matchers::WithinAbs(expect, 1e-3));
    REQUIRE_THAT(m.bias, Catch::Matchers::WithinAbs(0.0, 1e-3));
    const double obj_expect = 0.5 * expect * expect + 2.0 * c * std::max(0.0, 1.0 - expect);
    const auto xs = standardized_kept(m, x);
    REQUIRE_THAT(svm_objective(xs, y, m.weights, m.bias, c),
                 Catch::Matchers::WithinRel(obj_expect, 1e-3));
  }
}

TEST_CASE("svm solution is a global minimum of the convex primal") {
  const Problem pr = random_problem(42, 40, 6, 1.2);
  const double c = 1.0;
  const SvmModel m = svm_train(pr.x, pr.y, c, 1e-12, 50000);
  const auto xs = standardized_kept(m, pr.x);
  const double obj = svm_objective(xs, pr.y, m.weights, m.bias, c);

  // convex objective: no perturbation may beat the trained point by more
  // than the solver's own convergence slack
  Rng rng(7);
  for (int rep = 0; rep < 400; ++rep) {
    const double scale = std::pow(10.0, -3.0 + 3.0 * rng.uniform());
    std::vector<double> w = m.weights;
    for (double& wj : w) wj += scale * rng.normal();
    const double b = m.bias + scale * rng.normal();
    REQUIRE(svm_objective(xs, pr.y, w, b, c) >= obj * (1.0 - 1e-3));
  }
}

TEST_CASE("svm separates separable data and is deterministic") {
  const Problem pr = random_problem(99, 30, 4, 3.0);
  const SvmModel m1 = svm_train(pr.x, pr.y);
  const SvmModel m2 = svm_train(pr.x, pr.y);
  REQUIRE(m1.weights == m2.weights);
  REQUIRE(m1.bias == m2.bias);
  for (std::size_t i = 0; i < pr.x.size(); ++i)
    REQUIRE(svm_predict_ad(m1, pr.x[i]) == (pr.y[i] == 1));
}

TEST_CASE("svm drops constant features and scores ignore them") {
  Problem pr = random_problem(5, 20, 3, 2.0);
  for (auto& f : pr.x) f.push_back(7.5);  // constant column at index 3
  const SvmModel m = svm_train(pr.x, pr.y);
  REQUIRE(m.dropped == std::vector<int>{3});
  REQUIRE(m.weights.size() == 3);
  REQUIRE(m.feature_means.size() == 4);

  auto probe = pr.x[0];
  const double s0 = svm_score(m, probe);
  probe[3] = -123.0;
  REQUIRE(svm_score(m, probe) == s0);
}

TEST_CASE("svm score applies the stored standardization") {
  const Problem pr = random_problem(11, 16, 2, 1.0);
  const SvmModel m = svm_train(pr.x, pr.y);
  const std::vector<double> f{0.7, -1.3};
  double expect = m.bias;
  for (int j = 0; j < 2; ++j)
    expect += m.weights[j] * (f[j] - m.feature_means[j]) / m.feature_stds[j];
  REQUIRE_THAT(svm_score(m, f), Catch::Matchers::WithinAbs(expect, 1e-12));
  REQUIRE_THROWS_AS(svm_score(m, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("predict tie convention is AD at exactly zero") {
  SvmModel m;
  m.feature_means = {0.0};
  m.feature_stds = {1.0};
  m.weights = {0.0};
  m.bias = 0.0;
  REQUIRE(svm_predict_ad(m, {4.2}));
  m.bias = -1e-300;
  REQUIRE_FALSE(svm_predict_ad(m, {4.2}));
}

TEST_CASE("training input validation") {
  const std::vector<std::vector<double>> ok{{1.0}, {-1.0}};
  const std::vector<int> oky{1, -1};
  REQUIRE_THROWS_AS(svm_train({}, {}), std::invalid_argument);
  REQUIRE_THROWS_AS(svm_train(ok, {1}), std::invalid_argument);
  REQUIRE_THROWS_AS(svm_train({{1.0}, {1.0, 2.0}}, oky), std::invalid_argument);
  REQUIRE_THROWS_AS(svm_train({{1.0}, {std::nan("")}}, oky), std::invalid_argument);
  REQUIRE_THROWS_AS(svm_train(ok, {1, 0}), std::invalid_argument);
  REQUIRE_THROWS_AS(svm_train(ok, {1, 1}), std::invalid_argument);
  REQUIRE_THROWS_AS(svm_train(ok, oky, -1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(head_train(ok, oky, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(head_train(ok, oky, 0.5, 0), std::invalid_argument);
}

TEST_CASE("head gradient matches central finite differences") {
  const Problem pr = random_problem(123, 24, 5, 0.8);
  const auto m = svm_train(pr.x, pr.y);  // borrow standardization
  const auto xs = standardized_kept(m, pr.x);

  Rng rng(55);
  std::vector<double> w(5);
  for (double& wj : w) wj = rng.normal();
  const double b = rng.normal();

  std::vector<double> gw;
  double gb = 0.0;
  head_gradient(xs, pr.y, w, b, gw, gb);

  const double h = 1e-5;
  for (std::size_t j = 0; j < w.size(); ++j) {
    auto wp = w, wm = w;
    wp[j] += h;
    wm[j] -= h;
    const double fd = (head_loss(xs, pr.y, wp, b) - head_loss(xs, pr.y, wm, b)) / (2.0 * h);
    REQUIRE_THAT(gw[j], Catch::Matchers::WithinAbs(fd, 1e-6));
  }
  const double fdb = (head_loss(xs, pr.y, w, b + h) - head_loss(xs, pr.y, w, b - h)) / (2.0 * h);
  REQUIRE_THAT(gb, Catch::Matchers::WithinAbs(fdb, 1e-6));
}

TEST_CASE("head training lowers the loss and fits separable data") {
  const Problem pr = random_problem(31, 30, 4, 2.5);
  const SvmModel m = head_train(pr.x, pr.y);
  REQUIRE(m.kind == "head");
  const auto xs = standardized_kept(m, pr.x);
  REQUIRE(head_loss(xs, pr.y, m.weights, m.bias) <
          head_loss(xs, pr.y, std::vector<double>(4, 0.0), 0.0));
  int correct = 0;
  for (std::size_t i = 0; i < pr.x.size(); ++i)
    correct += (svm_predict_ad(m, pr.x[i]) == (pr.y[i] == 1)) ? 1 : 0;
  REQUIRE(correct == 30);
}

TEST_CASE("model json round trip is exact") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "petmc_classify_json";
  fs::create_directories(dir);
  const std::string path = (dir / "model.json").string();

  Problem pr = random_problem(77, 18, 3, 1.5);
  for (auto& f : pr.x) f.push_back(0.25);  // force one dropped dim
  SvmModel m = svm_train(pr.x, pr.y, 0.7);
  m.depth = 3;
  write_model(m, path);
  const SvmModel r = read_model(path);

  REQUIRE(r.kind == m.kind);
  REQUIRE(r.depth == 3);
  REQUIRE(r.C == m.C);
  REQUIRE(r.feature_means == m.feature_means);
  REQUIRE(r.feature_stds == m.feature_stds);
  REQUIRE(r.dropped == m.dropped);
  REQUIRE(r.weights == m.weights);
  REQUIRE(r.bias == m.bias);
  for (const auto& f : pr.x) REQUIRE(svm_score(r, f) == svm_score(m, f));
  fs::remove_all(dir);
}

TEST_CASE("model reader rejects corrupt files") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "petmc_classify_bad";
  fs::create_directories(dir);
  const auto write_text = [&](const std::string& name, const std::string& text) {
    std::ofstream os(dir / name);
    os << text;
    return (dir / name).string();
  };

  REQUIRE_THROWS_WITH(read_model((dir / "missing.json").string()),
                      Catch::Matchers::ContainsSubstring("cannot open"));
  REQUIRE_THROWS_WITH(read_model(write_text("garbage.json", "not json at all")),
                      Catch::Matchers::ContainsSubstring("corrupt"));
  REQUIRE_THROWS_WITH(read_model(write_text("partial.json", "{\"kind\":\"svm\"}")),
                      Catch::Matchers::ContainsSubstring("corrupt"));
  // weight count disagrees with the number of kept features
  REQUIRE_THROWS_WITH(
      read_model(write_text("shape.json",
                            "{\"kind\":\"svm\",\"depth\":1,\"C\":1.0,\"means\":[0.0],"
                            "\"stds\":[1.0],\"dropped\":[],\"weights\":[1.0,2.0],\"bias\":0.0}")),
      Catch::Matchers::ContainsSubstring("corrupt"));
  fs::remove_all(dir);
}
