// Copyright 2026 The mcfront Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "mcfront/error.hpp"
#include "mcfront/gradnet.hpp"

namespace mcfront::gradnet {

namespace {

using Objective = std::function<double(const Matrix& out)>;
using ObjectiveGrad = std::function<Matrix(const Matrix& out)>;

double evaluate(Layer& layer, const Matrix& x, SeqShape shape, const Objective& f) {
  layer.reset_state();
  return f(layer.forward(x, shape));
}

void track(GradCheckResult& r, double analytic, double numeric, const std::string& where) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  const double err = std::abs(analytic - numeric) / denom;
  if (r.checked == 0 || err > r.max_rel_error) {
    r.max_rel_error = err;
    char buf[96];
    std::snprintf(buf, sizeof buf, " (analytic %.6e, numeric %.6e)", analytic, numeric);
    r.worst = where + buf;
  }
  ++r.checked;
}

// Central difference of g at 0 with step eps: two-point, or the four-point
// stencil with O(eps^4) truncation error.
double central_difference(const std::function<double(double)>& g, double eps, bool fourth_order) {
  if (!fourth_order) return (g(eps) - g(-eps)) / (2 * eps);
  return (8.0 * (g(eps) - g(-eps)) - (g(2 * eps) - g(-2 * eps))) / (12 * eps);
}

GradCheckResult check(Layer& layer, const Matrix& input, SeqShape shape, double eps,
                      bool fourth_order, const Objective& f, const ObjectiveGrad& df) {
  if (!(eps > 0)) throw ValidationError("grad_check: eps must be positive");
  const bool saved_flag = layer.input_grad();
  layer.set_input_grad(true);

  auto tensors = layer.tensors();
  for (auto& t : tensors) t.tensor->zero_grad();
  layer.reset_state();
  const Matrix out = layer.forward(input, shape);
  const Matrix dx = layer.backward(df(out));

  GradCheckResult r;
  for (auto& t : tensors) {
    if (!t.tensor->trainable) continue;
    Matrix& v = t.tensor->value;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double orig = v.data()[i];
      const double numeric = central_difference(
          [&](double h) {
            v.data()[i] = orig + h;
            return evaluate(layer, input, shape, f);
          },
          eps, fourth_order);
      v.data()[i] = orig;
      track(r, t.tensor->grad.data()[i], numeric, t.name + "[" + std::to_string(i) + "]");
    }
  }
  Matrix x = input;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    const double numeric = central_difference(
        [&](double h) {
          x.data()[i] = orig + h;
          return evaluate(layer, x, shape, f);
        },
        eps, fourth_order);
    x.data()[i] = orig;
    track(r, dx.data()[i], numeric, "input[" + std::to_string(i) + "]");
  }
  layer.set_input_grad(saved_flag);
  layer.reset_state();
  return r;
}

}  // namespace

GradCheckResult grad_check(Layer& layer, const Matrix& input, SeqShape shape, double eps,
                           std::uint64_t seed) {
  layer.reset_state();
  const Eigen::Index rows = layer.forward(input, shape).rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix proj(rows, input.cols());
  for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = normal(rng);
  return check(
      layer, input, shape, eps, false,
      [&](const Matrix& out) { return out.cwiseProduct(proj).sum(); },
      [&](const Matrix&) { return proj; });
}

GradCheckResult grad_check_xent(Layer& layer, const Matrix& input, SeqShape shape,
                                std::span<const int> labels, double eps, bool fourth_order) {
  return check(
      layer, input, shape, eps, fourth_order,
      [&](const Matrix& out) { return softmax_xent(out, labels).loss_sum; },
      [&](const Matrix& out) {
        XentResult x = softmax_xent(out, labels);
        return Matrix(x.grad * static_cast<double>(x.count));
      });
}

}  // namespace mcfront::gradnet
