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

// Dense linear algebra, the cosine metric family, softmax and the seeded
// counter-based generator shared by every other module. Everything here is
// 64-bit floating point.

#ifndef ENCODE_NUMERICS_H_
#define ENCODE_NUMERICS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace encode {

using Vec = std::vector<double>;

// Row-major dense matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Throws DimError if values.size() != rows * cols.
  Mat(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Mat identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Per-thread tally of relevance-metric evaluations. Clustering, extraction
// and online inference must only ever bump `cosine`; the bench harness reads
// these to report operation counts independent of wall time.
struct MetricCounters {
  std::uint64_t cosine = 0;
  std::uint64_t scaled_dot = 0;
};

MetricCounters& metric_counters();
void reset_metric_counters();

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// 1 - a.b / (|a| |b|), in [0, 2]. Throws ZeroNormError / DimError.
double cosine_distance(std::span<const double> a, std::span<const double> b);

// (1 - cosine_distance(a, b)) / beta.
double sim(std::span<const double> a, std::span<const double> b, double beta);

// a.b / sqrt(dim), the logit of standard target attention.
double scaled_dot(std::span<const double> a, std::span<const double> b);

// Relevance metric of a target-attention module: the unified
// cosine-based sim, or the scaled dot-product of standard attention.
enum class AttentionMetric { kUnifiedSim, kScaledDot };

double attention_logit(AttentionMetric metric, std::span<const double> query,
                       std::span<const double> key, double beta);

// Max-subtracted softmax. Throws EmptyInputError on empty input.
std::vector<double> softmax(std::span<const double> logits);

double log_sum_exp(std::span<const double> logits);
double sigmoid(double x);

// W^T e. Throws DimError unless W.rows() == e.size().
Vec matvec_t(const Mat& w, std::span<const double> e);

// Returns a / |a|; throws ZeroNormError.
Vec normalized(std::span<const double> a);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// g += scale * outer(s, h), with g shaped |s| x |h|.
void add_outer(Mat& g, std::span<const double> s, std::span<const double> h, double scale = 1.0);

// Pairwise (cascade) summation; the result does not depend on how the
// terms were produced, only on their order, and error grows as O(log n).
double pairwise_sum(std::span<const double> terms);

// Pairwise reduction of equally shaped matrices.
Mat pairwise_sum(std::span<const Mat> terms);

// Splittable counter-based generator: the i-th draw of a stream is a pure
// function of (key, i), so splitting by user id makes per-user work
// reproducible under any schedule. Normals use Box-Muller on top of the
// integer stream so results do not depend on the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform on [0, 1).
  double uniform();
  double normal();
  // Uniform on {0, ..., n-1}; n must be positive.
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  // Independent child stream. Does not advance this generator.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  Rng(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace encode

#endif  // ENCODE_NUMERICS_H_
