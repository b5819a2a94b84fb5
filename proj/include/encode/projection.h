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

// Metric-learned dimensionality reduction: a d x m matrix W_h projects item
// embeddings (h = W_h^T e) and is trained so that relative cosine distances
// between behaviors survive the projection.

#ifndef ENCODE_PROJECTION_H_
#define ENCODE_PROJECTION_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "encode/numerics.h"

namespace encode {

struct TrainingLogEntry {
  std::size_t step = 0;
  double loss = 0.0;  // mean per-anchor auxiliary loss of the step
};

struct ProjectionModel {
  Mat weights;  // d x m
  std::uint64_t init_seed = 0;
  std::vector<TrainingLogEntry> log;

  std::size_t d() const { return weights.rows(); }
  std::size_t m() const { return weights.cols(); }
};

// W_h ~ N(0, 1) i.i.d. Throws DimError unless 1 <= m <= d.
ProjectionModel init_projection(std::size_t d, std::size_t m, Rng& rng);

Vec project(const ProjectionModel& model, std::span<const double> e);

// Anchor, positive and negative as indices into an EmbeddingBatch, plus the
// dynamic margin dis(s_i, s_n) - dis(s_i, s_p) (never negative).
struct Triplet {
  std::size_t anchor = 0;
  std::size_t pos = 0;
  std::size_t neg = 0;
  double alpha = 0.0;

  bool operator==(const Triplet&) const = default;
};

enum class SamplingStrategy { kWithinNeighbors, kWithinSequence, kWithinBatch };

enum class LossKind { kNone, kMse, kNPairMc, kTripletsFixed, kTripletsDynamic };

struct LossSpec {
  LossKind kind = LossKind::kTripletsDynamic;
  double fixed_alpha = 0.2;      // triplets_fixed only
  std::size_t n_negatives = 5;   // n_pair_mc only

  static LossSpec none() { return {.kind = LossKind::kNone}; }
  static LossSpec mse() { return {.kind = LossKind::kMse}; }
  static LossSpec n_pair_mc(std::size_t n_negatives = 5) {
    return {.kind = LossKind::kNPairMc, .n_negatives = n_negatives};
  }
  static LossSpec triplets_fixed(double alpha = 0.2) {
    return {.kind = LossKind::kTripletsFixed, .fixed_alpha = alpha};
  }
  static LossSpec triplets_dynamic() { return {.kind = LossKind::kTripletsDynamic}; }
};

// Parsing/printing of the kebab-case tags used on the command line.
LossKind parse_loss_kind(std::string_view tag);
std::string_view to_string(LossKind kind);
SamplingStrategy parse_sampling(std::string_view tag);
std::string_view to_string(SamplingStrategy strategy);

// Non-owning view of one or more behavior sequences laid end to end. Triplet
// indices address the flattened list; sequence boundaries drive the
// within-neighbors and within-sequence pools.
class EmbeddingBatch {
 public:
  EmbeddingBatch() = default;
  // A single sequence.
  EmbeddingBatch(std::span<const Vec> sequence) { add_sequence(sequence); }  // NOLINT

  void add_sequence(std::span<const Vec> sequence);

  std::size_t size() const { return offsets_.back(); }
  const Vec& operator[](std::size_t flat) const;
  // [begin, end) of the sequence containing `flat`.
  std::pair<std::size_t, std::size_t> segment_of(std::size_t flat) const;

 private:
  std::vector<std::span<const Vec>> sequences_;
  std::vector<std::size_t> offsets_{0};
};

// Draws two distinct candidates from the strategy's pool and orders them by
// original-space cosine distance to the anchor (ties: lower index is the
// positive).
//   within_neighbors: the anchor's previous and next events; at a sequence
//     endpoint, the single neighbor plus one uniform in-sequence draw.
//   within_sequence: uniform over the anchor's sequence.
//   within_batch: uniform over every sequence in the batch.
// Throws SamplingError when fewer than two candidates exist.
Triplet select_triplet(const EmbeddingBatch& s, std::size_t anchor, SamplingStrategy strategy,
                       Rng& rng);

// N-pair sampling: n_negatives + 1 distinct candidates, the closest one is
// the shared positive. Returned triplets share (anchor, pos); see
// loss_and_grad for how they are grouped.
std::vector<Triplet> select_npair(const EmbeddingBatch& s, std::size_t anchor,
                                  SamplingStrategy strategy, std::size_t n_negatives, Rng& rng);

struct LossAndGrad {
  double loss = 0.0;
  Mat grad;  // d x m
};

// Summed loss over `triplets` and its exact gradient w.r.t. W_h, with the
// cosine distance measured between projections:
//   triplets_dynamic  sum max(0, dis(h_i,h_p) - dis(h_i,h_n) + alpha_i)
//   triplets_fixed    same with spec.fixed_alpha
//   mse               sum over pairs (i,p) and (i,n) of
//                     (dis(h_i,h_j) - dis(s_i,s_j))^2
//   n_pair_mc         log(1 + sum_n exp(h_i.h_n - h_i.h_p)) per group of
//                     consecutive triplets sharing (anchor, pos)
//   none              0, zero gradient
// Hinge kinks take subgradient 0. Per-triplet terms are combined by
// pairwise summation.
LossAndGrad loss_and_grad(const ProjectionModel& model, std::span<const Triplet> triplets,
                          const EmbeddingBatch& s, const LossSpec& spec);

struct TrainConfig {
  LossSpec loss;
  SamplingStrategy sampling = SamplingStrategy::kWithinSequence;
  std::size_t steps = 2000;
  double learning_rate = 1e-4;
  std::size_t batch_size = 1024;  // anchors per step
  double aux_weight = 0.1;
  // Sequences drawn per step; they form the within-batch pool.
  std::size_t sequences_per_batch = 8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Adam on aux_weight * (mean per-anchor loss). Triplets are resampled every
// step. Appends one log entry per step. Throws TrainingError on a
// non-finite loss, SamplingError if no sequence can supply a triplet.
ProjectionModel train_projection(ProjectionModel model, std::span<const std::vector<Vec>> sequences,
                                 const TrainConfig& config, Rng& rng);

inline constexpr std::uint16_t kProjectionVersion = 1;

// "ENCP" | u16 version | u32 d | u32 m | d*m f64 row-major | u32 CRC32.
std::vector<std::uint8_t> serialize_projection(const ProjectionModel& model);
ProjectionModel deserialize_projection(std::span<const std::uint8_t> bytes);
void write_projection(const std::filesystem::path& path, const ProjectionModel& model);
// Throws CorruptStoreError / VersionError / IoError.
ProjectionModel read_projection(const std::filesystem::path& path);

}  // namespace encode

#endif  // ENCODE_PROJECTION_H_
