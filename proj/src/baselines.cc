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

#include "encode/baselines.h"

#include <algorithm>
#include <bit>
#include <numeric>
#include <string>

#include "encode/errors.h"

namespace encode {
namespace {

void require_nonempty(std::span<const Vec> s) {
  if (s.empty()) throw EmptyInputError("behavior sequence is empty");
}

// Softmax of `logits` placed at `selected` (ascending indices); zero elsewhere.
StrategyWeights scatter_softmax(std::size_t length, std::span<const std::size_t> selected,
                                std::span<const double> logits) {
  StrategyWeights out{.weights = std::vector<double>(length, 0.0), .mask = std::vector<bool>(length, false)};
  const std::vector<double> p = softmax(logits);
  for (std::size_t j = 0; j < selected.size(); ++j) {
    out.weights[selected[j]] = p[j];
    out.mask[selected[j]] = true;
  }
  return out;
}

StrategyWeights scatter_uniform(std::size_t length, std::span<const std::size_t> selected) {
  StrategyWeights out{.weights = std::vector<double>(length, 0.0), .mask = std::vector<bool>(length, false)};
  const double w = 1.0 / static_cast<double>(selected.size());
  for (std::size_t i : selected) {
    out.weights[i] = w;
    out.mask[i] = true;
  }
  return out;
}

// Indices of the k smallest keys, ties to the lower index, returned in
// ascending index order.
std::vector<std::size_t> smallest_k(std::span<const double> keys, std::size_t k) {
  std::vector<std::size_t> idx(keys.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return keys[a] < keys[b] || (keys[a] == keys[b] && a < b); });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Scaled dot-product attention over the retrieved behaviors.
StrategyWeights attend_retrieved(std::span<const Vec> s, std::span<const double> target,
                                 std::span<const std::size_t> retrieved) {
  std::vector<double> logits;
  logits.reserve(retrieved.size());
  for (std::size_t i : retrieved) logits.push_back(scaled_dot(s[i], target));
  return scatter_softmax(s.size(), retrieved, logits);
}

void check_k(std::size_t k) {
  if (k == 0) throw ConfigError("k must be at least 1");
}

}  // namespace

std::size_t StrategyWeights::selected() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

StrategyWeights din_l_weights(std::span<const Vec> s, std::span<const double> target,
                              AttentionMetric metric, double beta) {
  require_nonempty(s);
  std::vector<double> logits;
  logits.reserve(s.size());
  for (const Vec& e : s) logits.push_back(attention_logit(metric, target, e, beta));
  std::vector<std::size_t> all(s.size());
  std::iota(all.begin(), all.end(), 0);
  return scatter_softmax(s.size(), all, logits);
}

StrategyWeights din_short_weights(std::span<const Vec> s, std::span<const double> target, std::size_t m) {
  require_nonempty(s);
  check_k(m);
  std::vector<std::size_t> recent(std::min(m, s.size()));
  std::iota(recent.begin(), recent.end(), s.size() - recent.size());
  return attend_retrieved(s, target, recent);
}

StrategyWeights avg_pooling_weights(std::size_t length) {
  if (length == 0) throw EmptyInputError("behavior sequence is empty");
  return {.weights = std::vector<double>(length, 1.0 / static_cast<double>(length)),
          .mask = std::vector<bool>(length, true)};
}

Mat make_hash_matrix(std::size_t d, std::size_t n, Rng& rng) {
  if (d == 0 || n == 0) throw ConfigError("hash matrix needs d >= 1 and n >= 1");
  Mat w(d, n);
  for (double& v : w.values()) v = rng.normal();
  return w;
}

HashCodes simhash(std::span<const Vec> vectors, const Mat& w_r) {
  HashCodes codes{.bits = w_r.cols(), .words_per_code = (w_r.cols() + 63) / 64};
  codes.words.assign(vectors.size() * codes.words_per_code, 0);
  for (std::size_t v = 0; v < vectors.size(); ++v) {
    const Vec proj = matvec_t(w_r, vectors[v]);
    std::uint64_t* out = codes.words.data() + v * codes.words_per_code;
    for (std::size_t b = 0; b < proj.size(); ++b) {
      if (proj[b] >= 0.0) out[b / 64] |= std::uint64_t{1} << (b % 64);
    }
  }
  return codes;
}

HashCodes simhash(std::span<const double> vector, const Mat& w_r) {
  const Vec one(vector.begin(), vector.end());
  return simhash(std::span<const Vec>(&one, 1), w_r);
}

std::size_t hamming_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.size() != b.size()) throw DimError("hash codes differ in length");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += static_cast<std::size_t>(std::popcount(a[i] ^ b[i]));
  return d;
}

StrategyWeights eta_weights(std::span<const Vec> s, std::span<const double> target, const Mat& w_r,
                            std::size_t k) {
  return eta_weights(s, simhash(s, w_r), target, w_r, k);
}

StrategyWeights eta_weights(std::span<const Vec> s, const HashCodes& codes, std::span<const double> target,
                            const Mat& w_r, std::size_t k) {
  require_nonempty(s);
  check_k(k);
  if (codes.size() != s.size()) throw DimError("one hash code per behavior expected");
  const HashCodes t = simhash(target, w_r);
  std::vector<double> keys(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) keys[i] = static_cast<double>(hamming_distance(codes.code(i), t.code(0)));
  return attend_retrieved(s, target, smallest_k(keys, k));
}

StrategyWeights eta_encode_weights(std::span<const Vec> s, std::span<const double> target,
                                   const ProjectionModel& projection, std::size_t k) {
  std::vector<Vec> projected;
  projected.reserve(s.size());
  for (const Vec& e : s) projected.push_back(project(projection, e));
  return eta_encode_weights(s, projected, target, projection, k);
}

StrategyWeights eta_encode_weights(std::span<const Vec> s, std::span<const Vec> projected,
                                   std::span<const double> target, const ProjectionModel& projection,
                                   std::size_t k) {
  require_nonempty(s);
  check_k(k);
  if (projected.size() != s.size()) throw DimError("one projected vector per behavior expected");
  const Vec t = project(projection, target);
  std::vector<double> keys(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) keys[i] = cosine_distance(projected[i], t);
  return attend_retrieved(s, target, smallest_k(keys, k));
}

StrategyWeights twin_weights(std::span<const Vec> s, std::span<const double> target, std::size_t k) {
  require_nonempty(s);
  check_k(k);
  std::vector<double> logits(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) logits[i] = scaled_dot(s[i], target);
  std::vector<double> keys(logits.size());
  std::transform(logits.begin(), logits.end(), keys.begin(), [](double x) { return -x; });
  const std::vector<std::size_t> retrieved = smallest_k(keys, k);
  // Same metric for retrieval and attention, so the retrieval logits are reused.
  std::vector<double> kept;
  kept.reserve(retrieved.size());
  for (std::size_t i : retrieved) kept.push_back(logits[i]);
  return scatter_softmax(s.size(), retrieved, kept);
}

StrategyWeights sim_hard_weights(std::span<const Vec> s, std::span<const std::uint32_t> categories,
                                 std::span<const double> target, std::uint32_t target_category,
                                 std::size_t k) {
  require_nonempty(s);
  check_k(k);
  if (categories.size() != s.size()) throw DimError("one category per behavior expected");
  std::vector<std::size_t> kept;
  for (std::size_t i = s.size(); i-- > 0 && kept.size() < k;) {
    if (categories[i] == target_category) kept.push_back(i);
  }
  if (kept.empty()) {
    std::vector<std::size_t> recent(std::min(k, s.size()));
    std::iota(recent.begin(), recent.end(), s.size() - recent.size());
    return scatter_uniform(s.size(), recent);
  }
  std::reverse(kept.begin(), kept.end());
  return attend_retrieved(s, target, kept);
}

StrategyWeights sim_hard_weights(const BehaviorSequence& sequence, const ItemCatalog& catalog,
                                 std::uint64_t target_item, std::size_t k) {
  const Item& t = catalog.at(target_item);
  const std::vector<Vec> s = sequence_embeddings(sequence, catalog);
  std::vector<std::uint32_t> categories;
  categories.reserve(sequence.events.size());
  for (const Event& e : sequence.events) categories.push_back(e.category);
  return sim_hard_weights(s, categories, t.embedding, t.category, k);
}

StrategyWeights sdim_weights(std::span<const Vec> s, std::span<const double> target, const Mat& w_r,
                             std::size_t slice_width) {
  require_nonempty(s);
  return sdim_weights(simhash(s, w_r), target, w_r, slice_width);
}

StrategyWeights sdim_weights(const HashCodes& codes, std::span<const double> target, const Mat& w_r,
                             std::size_t slice_width) {
  const std::size_t length = codes.size();
  if (length == 0) throw EmptyInputError("behavior sequence is empty");
  if (slice_width == 0 || codes.bits % slice_width != 0) {
    throw ConfigError("slice width " + std::to_string(slice_width) + " does not divide " +
                      std::to_string(codes.bits) + " bits");
  }
  const HashCodes t = simhash(target, w_r);
  if (t.bits != codes.bits) throw DimError("hash codes differ in length");
  const std::size_t slices = codes.bits / slice_width;
  std::vector<double> counts(length, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t sl = 0; sl < slices; ++sl) {
      bool equal = true;
      for (std::size_t b = sl * slice_width; b < (sl + 1) * slice_width && equal; ++b) {
        equal = codes.bit(i, b) == t.bit(0, b);
      }
      if (equal) counts[i] += 1.0;
    }
  }
  const double total = pairwise_sum(counts);
  if (total == 0.0) return avg_pooling_weights(length);
  StrategyWeights out{.weights = std::vector<double>(length), .mask = std::vector<bool>(length)};
  for (std::size_t i = 0; i < length; ++i) {
    out.weights[i] = counts[i] / total;
    out.mask[i] = counts[i] > 0.0;
  }
  return out;
}

Vec strategy_interest(const StrategyWeights& weights, std::span<const Vec> s) {
  require_nonempty(s);
  if (weights.size() != s.size()) throw DimError("weights and behaviors differ in length");
  Vec out(s.front().size(), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (weights.weights[i] != 0.0) axpy(weights.weights[i], s[i], out);
  }
  return out;
}

}  // namespace encode
