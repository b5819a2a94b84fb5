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

// Offline multi-interest extraction: project a behavior sequence, cluster
// the projections, and summarize each cluster with an attention-weighted
// sum of its members' original embeddings, the cluster center acting as
// the query.

#ifndef ENCODE_INTEREST_H_
#define ENCODE_INTEREST_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "encode/binary_io.h"
#include "encode/clustering.h"
#include "encode/datagen.h"
#include "encode/numerics.h"
#include "encode/projection.h"

namespace encode {

struct WithinWeight {
  std::size_t cluster = 0;
  double weight = 0.0;

  bool operator==(const WithinWeight&) const = default;
};

struct InterestSet {
  std::uint64_t user_id = 0;
  std::vector<Vec> interests;  // u_1..u_K', original embedding space
  // Per behavior: its cluster and its weight within that cluster. Empty for
  // sets loaded from an interest store (which only keeps the interests).
  std::vector<WithinWeight> within;
  std::int64_t created_at = 0;  // timestamp of the newest behavior
  Digest config_hash{};

  std::size_t dim() const { return interests.empty() ? 0 : interests.front().size(); }
};

struct ExtractionConfig {
  std::size_t k = 30;
  std::size_t max_iters = 15;
  double beta = 20.0;
  ClusteringMethod clustering = ClusteringMethod::kKMeans;
  AttentionMetric metric = AttentionMetric::kUnifiedSim;
  std::uint64_t seed = 0;
};

inline constexpr std::string_view kCodeVersion = "encode-1.0";

// SHA-256 over the serialized projection, every extraction parameter and
// the code version.
Digest config_hash(const ProjectionModel& projection, const ExtractionConfig& config);

// Weights come from the reduced space (h against the cluster center); the
// weighted sums run over the original embeddings `s`.
InterestSet extract_interests(std::uint64_t user_id, std::span<const Vec> s, std::int64_t created_at,
                              const ProjectionModel& projection, const ExtractionConfig& config,
                              Rng& rng);

// Looks up embeddings in the catalog; the RNG stream is split from
// config.seed by user id.
InterestSet extract_interests(const BehaviorSequence& sequence, const ItemCatalog& catalog,
                              const ProjectionModel& projection, const ExtractionConfig& config);

struct ExtractionFailure {
  std::uint64_t user_id = 0;
  std::string message;
};

struct BatchExtraction {
  std::vector<InterestSet> sets;  // sorted by user id
  std::vector<ExtractionFailure> failures;
  Digest config_hash{};
};

// Independent per-user extraction on `parallelism` workers. Per-user
// failures are collected rather than thrown. Output is identical for any
// parallelism.
BatchExtraction batch_extract(std::span<const BehaviorSequence> sequences, const ItemCatalog& catalog,
                              const ProjectionModel& projection, const ExtractionConfig& config,
                              std::size_t parallelism = 1);

}  // namespace encode

#endif  // ENCODE_INTEREST_H_
