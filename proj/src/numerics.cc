// Copyright 2026 The Encode Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "encode/numerics.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "encode/errors.h"

namespace encode {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void check_same_dim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                   std::to_string(b.size()));
  }
}

}  // namespace

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw DimError("matrix storage has " + std::to_string(values_.size()) +
                   " entries, expected " + std::to_string(rows * cols));
  }
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

MetricCounters& metric_counters() {
  thread_local MetricCounters counters;
  return counters;
}

void reset_metric_counters() { metric_counters() = MetricCounters{}; }

double dot(std::span<const double> a, std::span<const double> b) {
  check_same_dim(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  check_same_dim(a, b);
  ++metric_counters().cosine;
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw ZeroNormError("cosine distance of a zero-norm vector");
  const double cos = std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
  return 1.0 - cos;
}

double sim(std::span<const double> a, std::span<const double> b, double beta) {
  return (1.0 - cosine_distance(a, b)) / beta;
}

double scaled_dot(std::span<const double> a, std::span<const double> b) {
  ++metric_counters().scaled_dot;
  return dot(a, b) / std::sqrt(static_cast<double>(a.size()));
}

double attention_logit(AttentionMetric metric, std::span<const double> query,
                       std::span<const double> key, double beta) {
  return metric == AttentionMetric::kUnifiedSim ? sim(key, query, beta) : scaled_dot(key, query);
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw EmptyInputError("softmax of an empty list");
  const double hi = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - hi);
  const double total = pairwise_sum(out);
  for (double& v : out) v /= total;
  return out;
}

double log_sum_exp(std::span<const double> logits) {
  if (logits.empty()) throw EmptyInputError("log-sum-exp of an empty list");
  const double hi = *std::max_element(logits.begin(), logits.end());
  std::vector<double> terms(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) terms[i] = std::exp(logits[i] - hi);
  return hi + std::log(pairwise_sum(terms));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec matvec_t(const Mat& w, std::span<const double> e) {
  if (w.rows() != e.size()) {
    throw DimError("W^T e: W has " + std::to_string(w.rows()) + " rows, e has dim " +
                   std::to_string(e.size()));
  }
  Vec out(w.cols(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) out[c] += row[c] * e[r];
  }
  return out;
}

Vec normalized(std::span<const double> a) {
  const double n = norm(a);
  if (n == 0.0) throw ZeroNormError("cannot normalize a zero-norm vector");
  Vec out(a.begin(), a.end());
  for (double& v : out) v /= n;
  return out;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same_dim(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void add_outer(Mat& g, std::span<const double> s, std::span<const double> h, double scale) {
  if (g.rows() != s.size() || g.cols() != h.size()) throw DimError("outer product shape mismatch");
  for (std::size_t r = 0; r < s.size(); ++r) {
    const double sr = scale * s[r];
    if (sr == 0.0) continue;
    for (std::size_t c = 0; c < h.size(); ++c) g(r, c) += sr * h[c];
  }
}

double pairwise_sum(std::span<const double> terms) {
  if (terms.size() <= 8) {
    double acc = 0.0;
    for (double t : terms) acc += t;
    return acc;
  }
  const std::size_t half = terms.size() / 2;
  return pairwise_sum(terms.subspan(0, half)) + pairwise_sum(terms.subspan(half));
}

Mat pairwise_sum(std::span<const Mat> terms) {
  if (terms.empty()) throw EmptyInputError("sum of zero matrices");
  if (terms.size() == 1) return terms[0];
  const std::size_t half = terms.size() / 2;
  Mat left = pairwise_sum(terms.subspan(0, half));
  const Mat right = pairwise_sum(terms.subspan(half));
  if (left.rows() != right.rows() || left.cols() != right.cols()) {
    throw DimError("matrix sum shape mismatch");
  }
  axpy(1.0, right.values(), left.values());
  return left;
}

Rng::Rng(std::uint64_t seed) : seed_(seed), key_(mix64(seed ^ 0x5EED5EED5EED5EEDULL)) {}

std::uint64_t Rng::next_u64() { return mix64(key_ + kGolden * ++counter_); }

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::uniform_index(std::size_t n) {
  // Lemire's nearly-divisionless bounded draw.
  const std::uint64_t bound = n;
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = -bound % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(seed_, mix64(key_ ^ mix64(stream + kGolden)));
}

}  // namespace encode
