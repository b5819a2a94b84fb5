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

// Synthetic catalogs and users with planted multi-interest structure, the
// JSONL dataset format, and CSV event-log ingestion.

#ifndef ENCODE_DATAGEN_H_
#define ENCODE_DATAGEN_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <vector>

#include "encode/numerics.h"

namespace encode {

struct Item {
  std::uint64_t id = 0;
  Vec embedding;
  std::uint32_t category = 0;

  bool operator==(const Item&) const = default;
};

// Items keyed by id, kept in insertion order with a contiguous copy of the
// embeddings for brute-force scans.
class ItemCatalog {
 public:
  ItemCatalog() = default;
  explicit ItemCatalog(std::size_t dim) : dim_(dim) {}

  // Throws DuplicateKeyError, DimError or ZeroNormError.
  void add(Item item);

  // Throws NotFoundError.
  const Item& at(std::uint64_t id) const;
  const Item* find(std::uint64_t id) const;
  bool contains(std::uint64_t id) const { return index_.contains(id); }

  std::size_t size() const { return items_.size(); }
  std::size_t dim() const { return dim_; }
  std::span<const Item> items() const { return items_; }

  // Index of the item maximizing dot(query, embedding); ties go to the
  // earlier item.
  std::size_t argmax_dot(std::span<const double> query) const;

  bool operator==(const ItemCatalog& other) const {
    return dim_ == other.dim_ && items_ == other.items_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<Item> items_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<double> flat_;
};

// Ground truth for planted-interest experiments.
struct UserProfile {
  std::uint64_t user_id = 0;
  std::vector<Vec> centers;     // unit vectors
  std::vector<double> weights;  // sums to 1
};

struct Event {
  std::uint64_t item_id = 0;
  std::int64_t timestamp = 0;  // seconds
  std::uint32_t category = 0;

  bool operator==(const Event&) const = default;
};

struct BehaviorSequence {
  std::uint64_t user_id = 0;
  std::vector<Event> events;  // timestamps nondecreasing

  bool operator==(const BehaviorSequence&) const = default;
};

enum class Split : std::uint8_t { kTrain, kTest };

struct LabeledSample {
  std::uint64_t user_id = 0;
  std::uint64_t target_item_id = 0;
  int label = 0;
  Split split = Split::kTrain;

  bool operator==(const LabeledSample&) const = default;
};

struct Dataset {
  ItemCatalog catalog;
  std::vector<BehaviorSequence> sequences;
  std::vector<LabeledSample> samples;

  bool operator==(const Dataset&) const = default;
};

// Click model: P(label = 1) = sigmoid(gamma * max_g cos(target, center_g) + bias).
struct LabelModel {
  double gamma = 8.0;
  double bias = -4.0;
  // Noise scale for positive-candidate draws, as in generate_user_sequence.
  double candidate_kappa = 10.0;
  double test_fraction = 0.2;
};

inline constexpr double kDefaultCategorySpread = 0.12;

// Items are normalized draws from per-category Gaussian bumps around random
// unit centers; category is the bump index (uniform). Ids are 0..n_items-1.
ItemCatalog generate_catalog(std::size_t n_items, std::size_t d, std::size_t n_categories,
                             Rng& rng, double category_spread = kDefaultCategorySpread);

// G interest centers anchored on items of distinct categories (when the
// catalog has enough), perturbed, normalized, and rejected until every pair
// is at least `min_separation_deg` apart. Throws SamplingError when that
// cannot be met after many retries.
UserProfile generate_profile(std::uint64_t user_id, const ItemCatalog& catalog, std::size_t num_interests,
                             Rng& rng, double min_separation_deg = 60.0);

// Each event draws a center by weight, then picks the catalog item
// maximizing dot(item, center + N(0, I) / noise_kappa). Timestamps strictly
// increase. `planted` (optional) receives the center index of every event.
// Throws ConfigError when length == 0.
BehaviorSequence generate_user_sequence(const UserProfile& profile, const ItemCatalog& catalog,
                                        std::size_t length, double noise_kappa, Rng& rng,
                                        std::vector<std::size_t>* planted = nullptr);

double click_probability(const UserProfile& profile, std::span<const double> target,
                         const LabelModel& model);

// n_pos candidates near a latent center, n_neg uniform over the catalog;
// each labeled by Bernoulli(click_probability).
std::vector<LabeledSample> generate_labeled_samples(const UserProfile& profile,
                                                    const ItemCatalog& catalog, std::size_t n_pos,
                                                    std::size_t n_neg, Rng& rng,
                                                    const LabelModel& model = {});

struct DatasetParams {
  std::size_t n_users = 100;
  std::size_t length = 1000;
  std::size_t n_items = 50000;
  std::size_t dim = 32;
  std::size_t n_categories = 8;
  std::size_t num_interests = 3;
  // About 2% of adjacent behaviors repeat at the default sizes.
  double noise_kappa = 6.0;
  double min_separation_deg = 60.0;
  std::size_t samples_pos = 20;
  std::size_t samples_neg = 20;
  LabelModel label_model;
  std::uint64_t seed = 0;
  // Worker threads for per-user generation; output does not depend on it.
  std::size_t parallelism = 1;
};

struct GeneratedData {
  Dataset dataset;
  std::vector<UserProfile> profiles;
};

// Users get ids 1..n_users and an RNG stream split by id.
GeneratedData generate_dataset(const DatasetParams& params);

std::vector<Vec> sequence_embeddings(const BehaviorSequence& sequence, const ItemCatalog& catalog);

inline constexpr int kDatasetVersion = 1;

// JSONL: a header line {"format":"encode-ds","version":1,"d":..,"items":..,
// "sequences":..,"samples":..} then one record per line with "kind" in
// {"item","sequence","sample"}.
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
// Throws ParseError (with line number), VersionError or IoError.
Dataset read_dataset(const std::filesystem::path& path);

struct IngestedLog {
  ItemCatalog catalog;
  std::vector<BehaviorSequence> sequences;
};

// CSV with a header naming user_id,item_id,timestamp,category (any order,
// extra columns ignored). Events are grouped per user, stably sorted by
// timestamp (duplicates kept) and truncated to the most recent max_length.
// Every item gets a random unit embedding derived from (rng, item id); its
// category is the one on its first row. Throws SchemaError or ParseError.
IngestedLog ingest_event_log(const std::filesystem::path& path, std::size_t embedding_dim,
                             Rng& rng, std::size_t max_length = 1000);

}  // namespace encode

#endif  // ENCODE_DATAGEN_H_
