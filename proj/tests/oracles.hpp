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

#pragma once

// Independent reference implementations used only by tests. Nothing here
// shares code with the library paths they check.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace mcfront::testing {

// Direct O(N^2) DFT of a real sequence.
inline std::vector<std::complex<double>> direct_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * i % n) / double(n));
    out[k] = acc;
  }
  return out;
}

// Gaussian elimination with partial pivoting on a dense complex system.
inline Eigen::VectorXcd gauss_solve(Eigen::MatrixXcd a, Eigen::VectorXcd b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    if (std::abs(a(pivot, col)) == 0.0) throw std::runtime_error("singular");
    a.row(col).swap(a.row(pivot));
    std::swap(b[col], b[pivot]);
    for (Eigen::Index r = col + 1; r < n; ++r) {
      const std::complex<double> f = a(r, col) / a(col, col);
      for (Eigen::Index c = col; c < n; ++c) a(r, c) -= f * a(col, c);
      b[r] -= f * b[col];
    }
  }
  Eigen::VectorXcd x(n);
  for (Eigen::Index r = n - 1; r >= 0; --r) {
    std::complex<double> acc = b[r];
    for (Eigen::Index c = r + 1; c < n; ++c) acc -= a(r, c) * x[c];
    x[r] = acc / a(r, r);
  }
  return x;
}

struct TwoPassStats {
  Eigen::VectorXd mean, variance;
};

// Rows are samples.
inline TwoPassStats two_pass_stats(const Eigen::MatrixXd& rows) {
  TwoPassStats s;
  s.mean = Eigen::VectorXd::Zero(rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) s.mean += rows.row(r).transpose();
  s.mean /= double(rows.rows());
  s.variance = Eigen::VectorXd::Zero(rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r)
    s.variance += (rows.row(r).transpose() - s.mean).cwiseAbs2();
  s.variance /= double(rows.rows());
  return s;
}

inline Eigen::VectorXcd random_complex(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = {g(rng), g(rng)};
  return v;
}

// Welch magnitude-squared coherence between two signals at one DFT bin of
// `seg`-sample Hann-windowed segments with 50% overlap, using direct DFT sums.
inline double welch_msc(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int seg, int bin) {
  std::complex<double> sab = 0.0;
  double saa = 0.0, sbb = 0.0;
  std::vector<std::complex<double>> twiddle(seg);
  for (int n = 0; n < seg; ++n) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / seg);
    twiddle[n] = w * std::polar(1.0, -2.0 * std::numbers::pi * double(bin) * n / seg);
  }
  for (Eigen::Index start = 0; start + seg <= a.size(); start += seg / 2) {
    std::complex<double> fa = 0.0, fb = 0.0;
    for (int n = 0; n < seg; ++n) {
      fa += a[start + n] * twiddle[n];
      fb += b[start + n] * twiddle[n];
    }
    sab += fa * std::conj(fb);
    saa += std::norm(fa);
    sbb += std::norm(fb);
  }
  return std::norm(sab) / (saa * sbb);
}

// Phase of the single-bin DFT of x at frequency f (Hz).
inline double tone_phase(const Eigen::VectorXd& x, double f, double fs) {
  std::complex<double> acc = 0.0;
  for (Eigen::Index n = 0; n < x.size(); ++n)
    acc += x[n] * std::polar(1.0, -2.0 * std::numbers::pi * f * double(n) / fs);
  return std::arg(acc);
}

}  // namespace mcfront::testing
