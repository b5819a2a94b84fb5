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

// Uniform dispatch over ENCODE and the reference strategies, and the
// experiments built on it: relevance indicator, head-based AUC, and the
// online latency benchmark.

#ifndef ENCODE_EXPERIMENT_H_
#define ENCODE_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "encode/baselines.h"
#include "encode/datagen.h"
#include "encode/evalmetrics.h"
#include "encode/inference.h"
#include "encode/interest.h"
#include "encode/projection.h"

namespace encode {

enum class StrategyKind {
  kEncode,
  kEncodeMinus,  // ENCODE with scaled dot-product in place of the unified metric
  kDinL,
  kDinShort,
  kAvgPooling,
  kSimHard,
  kEta,
  kEtaEncode,
  kEtaTa,
  kTwin,
  kSdim,
};

// "unified-sim" or "scaled-dot" (snake_case accepted).
AttentionMetric parse_metric(std::string_view tag);
std::string_view to_string(AttentionMetric metric);

// Tags are snake_case ("din_l"); kebab-case is accepted too.
StrategyKind parse_strategy(std::string_view tag);
std::string_view to_string(StrategyKind kind);
std::vector<StrategyKind> all_strategies();
std::vector<StrategyKind> parse_strategy_list(std::string_view comma_separated);

struct StrategyEnv {
  ProjectionModel projection;
  ExtractionConfig extraction;  // beta and metric also drive online attention
  Mat hash_matrix;              // d x n
  std::size_t top_k = kDefaultTopK;
  std::size_t short_length = kDefaultShortLength;
  std::size_t slice_width = kDefaultSliceWidth;
};

// Hash matrix drawn from Rng(hash_seed).
StrategyEnv make_env(ProjectionModel projection, const ExtractionConfig& extraction, std::size_t hash_bits,
                     std::uint64_t hash_seed);

// Everything a strategy may compute offline for one user.
struct UserArtifacts {
  std::uint64_t user_id = 0;
  std::vector<Vec> s;
  std::vector<std::uint32_t> categories;
  InterestSet encode_set;        // when ENCODE is requested
  InterestSet encode_minus_set;  // when ENCODE- is requested
  HashCodes codes;               // when ETA or SDIM is requested
  std::vector<Vec> projected;    // when ETA-ENCODE is requested
};

UserArtifacts prepare_user(const StrategyEnv& env, const BehaviorSequence& sequence, const ItemCatalog& catalog,
                           std::span<const StrategyKind> kinds);

// Distribution over the L behaviors. For ENCODE this is the product of
// within- and between-cluster weights.
StrategyWeights strategy_weights(StrategyKind kind, const StrategyEnv& env, const UserArtifacts& user,
                                 const Item& target);

// The interest vector I fed to the scoring head. ENCODE attends over its K'
// interests only; the others pool the behaviors with their weights.
Vec strategy_interest(StrategyKind kind, const StrategyEnv& env, const UserArtifacts& user, const Item& target);

// Mean RI per strategy against DIN-L (scaled dot-product) over every
// (user, sample target) pair of the dataset, up to `max_pairs` (0 = all).
std::vector<RiRecord> evaluate_ri(const Dataset& dataset, const StrategyEnv& env,
                                  std::span<const StrategyKind> kinds, std::uint64_t seed,
                                  std::size_t max_pairs = 0, std::size_t parallelism = 1);

struct HeadProtocol {
  HeadTrainConfig train;
  bool realtime_feature = false;
  std::uint64_t shuffle_seed = 0;
};

// One example per sample (of `split` only, if given), in dataset order.
std::vector<HeadExample> head_examples(const Dataset& dataset, const StrategyEnv& env, StrategyKind kind,
                                       bool realtime_feature, std::optional<Split> split,
                                       std::size_t parallelism = 1);

// Trains one head per strategy on the train split and reports test AUC and
// GAUC (grouped by user).
std::vector<AucRecord> evaluate_auc(const Dataset& dataset, const StrategyEnv& env,
                                    std::span<const StrategyKind> kinds, const HeadProtocol& protocol,
                                    std::uint64_t seed, std::size_t parallelism = 1);

struct BenchConfig {
  std::vector<std::size_t> lengths{1000, 4000, 16000};
  std::size_t repetitions = 200;
  std::size_t warmup = 20;
  std::size_t batch = 64;  // targets per timed call
  std::size_t n_items = 20000;
  std::size_t n_categories = 8;
  std::size_t num_interests = 3;
  double noise_kappa = 6.0;
  std::uint64_t seed = 0;
};

// Per (strategy, L): one synthetic user of length L with offline artifacts
// precomputed; times only the online computation of I for a batch of
// targets and counts similarity evaluations per target.
std::vector<BenchRecord> run_bench(const StrategyEnv& env, std::span<const StrategyKind> kinds,
                                   const BenchConfig& config);

}  // namespace encode

#endif  // ENCODE_EXPERIMENT_H_
