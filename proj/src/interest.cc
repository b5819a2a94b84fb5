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

#include "encode/interest.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include "encode/errors.h"

namespace encode {

Digest config_hash(const ProjectionModel& projection, const ExtractionConfig& config) {
  ByteWriter w;
  w.put_bytes(serialize_projection(projection));
  w.put_u64(config.k);
  w.put_u64(config.max_iters);
  w.put_f64(config.beta);
  w.put_u8(static_cast<std::uint8_t>(config.clustering));
  w.put_u8(static_cast<std::uint8_t>(config.metric));
  w.put_u64(config.seed);
  w.put_magic(kCodeVersion);
  return sha256(w.bytes());
}

InterestSet extract_interests(std::uint64_t user_id, std::span<const Vec> s, std::int64_t created_at,
                              const ProjectionModel& projection, const ExtractionConfig& config,
                              Rng& rng) {
  if (s.empty()) throw EmptyInputError("user " + std::to_string(user_id) + " has no behaviors");
  const std::size_t d = s.front().size();
  if (d != projection.d()) {
    throw DimError("behavior dim " + std::to_string(d) + " does not match projection d " +
                   std::to_string(projection.d()));
  }

  std::vector<Vec> h;
  h.reserve(s.size());
  for (const Vec& e : s) h.push_back(project(projection, e));

  const Clustering clusters = run_clustering(config.clustering, h, config.k, config.max_iters, rng);
  const std::size_t k = clusters.num_clusters();

  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < s.size(); ++i) members[clusters.assignments[i]].push_back(i);

  InterestSet out{.user_id = user_id, .created_at = created_at};
  out.interests.assign(k, Vec(d, 0.0));
  out.within.resize(s.size());
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> logits;
    logits.reserve(members[c].size());
    for (std::size_t idx : members[c]) {
      logits.push_back(attention_logit(config.metric, clusters.centers[c], h[idx], config.beta));
    }
    const std::vector<double> w = softmax(logits);
    for (std::size_t j = 0; j < members[c].size(); ++j) {
      const std::size_t idx = members[c][j];
      out.within[idx] = {.cluster = c, .weight = w[j]};
      axpy(w[j], s[idx], out.interests[c]);
    }
  }
  return out;
}

InterestSet extract_interests(const BehaviorSequence& sequence, const ItemCatalog& catalog,
                              const ProjectionModel& projection, const ExtractionConfig& config) {
  if (sequence.events.empty()) {
    throw EmptyInputError("user " + std::to_string(sequence.user_id) + " has no behaviors");
  }
  const std::vector<Vec> s = sequence_embeddings(sequence, catalog);
  Rng rng = Rng(config.seed).split(sequence.user_id);
  return extract_interests(sequence.user_id, s, sequence.events.back().timestamp, projection, config,
                           rng);
}

BatchExtraction batch_extract(std::span<const BehaviorSequence> sequences, const ItemCatalog& catalog,
                              const ProjectionModel& projection, const ExtractionConfig& config,
                              std::size_t parallelism) {
  BatchExtraction out{.config_hash = config_hash(projection, config)};
  std::vector<std::optional<InterestSet>> results(sequences.size());
  std::vector<std::string> errors(sequences.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < sequences.size(); i = next++) {
      try {
        InterestSet set = extract_interests(sequences[i], catalog, projection, config);
        set.config_hash = out.config_hash;
        results[i] = std::move(set);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(1, sequences.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < sequences.size(); ++i) {
    if (results[i]) {
      out.sets.push_back(std::move(*results[i]));
    } else {
      out.failures.push_back({.user_id = sequences[i].user_id, .message = errors[i]});
    }
  }
  std::stable_sort(out.sets.begin(), out.sets.end(),
                   [](const InterestSet& a, const InterestSet& b) { return a.user_id < b.user_id; });
  return out;
}

}  // namespace encode
