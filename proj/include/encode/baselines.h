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

// Reference sequence-modeling strategies. Each maps a behavior sequence and
// a target to a distribution over the L behaviors.

#ifndef ENCODE_BASELINES_H_
#define ENCODE_BASELINES_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "encode/datagen.h"
#include "encode/numerics.h"
#include "encode/projection.h"

namespace encode {

struct StrategyWeights {
  std::vector<double> weights;  // length L, sums to 1
  std::vector<bool> mask;       // true where the strategy kept the behavior

  std::size_t size() const { return weights.size(); }
  // Number of kept behaviors.
  std::size_t selected() const;
};

inline constexpr std::size_t kDefaultTopK = 50;
inline constexpr std::size_t kDefaultShortLength = 50;
inline constexpr std::size_t kDefaultHashBits = 64;
inline constexpr std::size_t kDefaultSliceWidth = 2;

// Softmax over all L of scaled_dot(s_i, x_t) or sim(s_i, x_t, beta).
StrategyWeights din_l_weights(std::span<const Vec> s, std::span<const double> target,
                              AttentionMetric metric = AttentionMetric::kScaledDot, double beta = 20.0);

// Scaled dot-product attention over the most recent `m` behaviors.
StrategyWeights din_short_weights(std::span<const Vec> s, std::span<const double> target,
                                  std::size_t m = kDefaultShortLength);

StrategyWeights avg_pooling_weights(std::size_t length);

// n-bit sign codes, packed 64 bits per word.
struct HashCodes {
  std::size_t bits = 0;
  std::size_t words_per_code = 0;
  std::vector<std::uint64_t> words;

  std::size_t size() const { return words_per_code == 0 ? 0 : words.size() / words_per_code; }
  std::span<const std::uint64_t> code(std::size_t i) const {
    return {words.data() + i * words_per_code, words_per_code};
  }
  bool bit(std::size_t i, std::size_t b) const { return (code(i)[b / 64] >> (b % 64)) & 1u; }
};

// d x n matrix with N(0,1) entries.
Mat make_hash_matrix(std::size_t d, std::size_t n, Rng& rng);

// Bit j of the code of e is sign(sum_i e[i] * W_r(i, j)) with sign(0) = +1
// (stored as 1) and negative stored as 0. Throws DimError.
HashCodes simhash(std::span<const Vec> vectors, const Mat& w_r);
HashCodes simhash(std::span<const double> vector, const Mat& w_r);

std::size_t hamming_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

// ETA: top-k behaviors by Hamming distance of SimHash codes (ties to the
// lower index), then scaled dot-product attention over the retrieved set.
// Codes of the behaviors are an offline artifact; this overload computes
// them on the fly.
StrategyWeights eta_weights(std::span<const Vec> s, std::span<const double> target, const Mat& w_r,
                            std::size_t k = kDefaultTopK);
StrategyWeights eta_weights(std::span<const Vec> s, const HashCodes& codes, std::span<const double> target,
                            const Mat& w_r, std::size_t k = kDefaultTopK);

// ETA with retrieval by cosine distance in the learned low-dimensional space.
StrategyWeights eta_encode_weights(std::span<const Vec> s, std::span<const double> target,
                                   const ProjectionModel& projection, std::size_t k = kDefaultTopK);
StrategyWeights eta_encode_weights(std::span<const Vec> s, std::span<const Vec> projected,
                                   std::span<const double> target, const ProjectionModel& projection,
                                   std::size_t k = kDefaultTopK);

// Retrieval and attention both by scaled dot-product. Also serves as the
// ETA-TA variant, which is the same computation.
StrategyWeights twin_weights(std::span<const Vec> s, std::span<const double> target,
                             std::size_t k = kDefaultTopK);

// Category filter, most recent k matches, scaled dot-product attention over
// them. With no match, uniform over the most recent k behaviors.
StrategyWeights sim_hard_weights(std::span<const Vec> s, std::span<const std::uint32_t> categories,
                                 std::span<const double> target, std::uint32_t target_category,
                                 std::size_t k = kDefaultTopK);
StrategyWeights sim_hard_weights(const BehaviorSequence& sequence, const ItemCatalog& catalog,
                                 std::uint64_t target_item, std::size_t k = kDefaultTopK);

// Weight of behavior i proportional to the number of width-`slice_width`
// slices of its code equal to the target's; uniform when nothing collides.
// Throws ConfigError unless slice_width divides the code length.
StrategyWeights sdim_weights(std::span<const Vec> s, std::span<const double> target, const Mat& w_r,
                             std::size_t slice_width = kDefaultSliceWidth);
StrategyWeights sdim_weights(const HashCodes& codes, std::span<const double> target, const Mat& w_r,
                             std::size_t slice_width = kDefaultSliceWidth);

// I = sum_i p_i s_i.
Vec strategy_interest(const StrategyWeights& weights, std::span<const Vec> s);

}  // namespace encode

#endif  // ENCODE_BASELINES_H_
