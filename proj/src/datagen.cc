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

#include "encode/datagen.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>

#include "encode/errors.h"
#include "json.hpp"

namespace encode {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::int64_t kEpochStart = 1'600'000'000;

Vec gaussian(std::size_t d, Rng& rng) {
  Vec v(d);
  for (double& x : v) x = rng.normal();
  return v;
}

Vec random_unit(std::size_t d, Rng& rng) {
  for (;;) {
    Vec v = gaussian(d, rng);
    if (norm(v) > 0.0) return normalized(v);
  }
}

std::size_t draw_weighted(std::span<const double> weights, Rng& rng) {
  double u = rng.uniform();
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

// Catalog item picked by the noisy-argmax rule around `center`.
std::size_t draw_near(std::span<const double> center, const ItemCatalog& catalog,
                      double noise_kappa, Rng& rng) {
  Vec query(center.begin(), center.end());
  if (std::isfinite(noise_kappa)) {
    for (double& q : query) q += rng.normal() / noise_kappa;
  }
  return catalog.argmax_dot(query);
}

}  // namespace

void ItemCatalog::add(Item item) {
  if (item.embedding.size() != dim_) {
    throw DimError("item " + std::to_string(item.id) + " has dim " +
                   std::to_string(item.embedding.size()) + ", catalog dim " + std::to_string(dim_));
  }
  if (norm(item.embedding) == 0.0) {
    throw ZeroNormError("item " + std::to_string(item.id) + " has a zero embedding");
  }
  if (index_.contains(item.id)) {
    throw DuplicateKeyError("duplicate item id " + std::to_string(item.id));
  }
  index_.emplace(item.id, items_.size());
  flat_.insert(flat_.end(), item.embedding.begin(), item.embedding.end());
  items_.push_back(std::move(item));
}

const Item& ItemCatalog::at(std::uint64_t id) const {
  const Item* item = find(id);
  if (item == nullptr) throw NotFoundError("item " + std::to_string(id) + " not in catalog");
  return *item;
}

const Item* ItemCatalog::find(std::uint64_t id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &items_[it->second];
}

std::size_t ItemCatalog::argmax_dot(std::span<const double> query) const {
  if (query.size() != dim_) throw DimError("query dim does not match catalog");
  if (items_.empty()) throw EmptyInputError("argmax over an empty catalog");
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  const double* row = flat_.data();
  for (std::size_t i = 0; i < items_.size(); ++i, row += dim_) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) s += row[k] * query[k];
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

ItemCatalog generate_catalog(std::size_t n_items, std::size_t d, std::size_t n_categories,
                             Rng& rng, double category_spread) {
  if (n_items == 0 || d == 0 || n_categories == 0) {
    throw ConfigError("catalog sizes must be positive");
  }
  std::vector<Vec> bumps;
  bumps.reserve(n_categories);
  for (std::size_t c = 0; c < n_categories; ++c) bumps.push_back(random_unit(d, rng));

  ItemCatalog catalog(d);
  for (std::size_t i = 0; i < n_items; ++i) {
    const auto category = static_cast<std::uint32_t>(rng.uniform_index(n_categories));
    Vec e = bumps[category];
    for (double& x : e) x += category_spread * rng.normal();
    if (norm(e) == 0.0) e = bumps[category];
    catalog.add({.id = i, .embedding = normalized(e), .category = category});
  }
  return catalog;
}

UserProfile generate_profile(std::uint64_t user_id, const ItemCatalog& catalog,
                             std::size_t num_interests, Rng& rng, double min_separation_deg) {
  if (num_interests == 0) throw ConfigError("a profile needs at least one interest");
  if (catalog.size() == 0) throw EmptyInputError("empty catalog");
  const double max_cos = std::cos(min_separation_deg * std::numbers::pi / 180.0);
  const auto items = catalog.items();

  for (int attempt = 0; attempt < 1000; ++attempt) {
    UserProfile profile{.user_id = user_id};
    std::vector<std::uint32_t> used_categories;
    bool ok = true;
    for (std::size_t g = 0; g < num_interests && ok; ++g) {
      // Prefer an anchor from a category not yet used by this user.
      const Item* anchor = nullptr;
      for (int tries = 0; tries < 64; ++tries) {
        const Item& cand = items[rng.uniform_index(items.size())];
        anchor = &cand;
        if (std::find(used_categories.begin(), used_categories.end(), cand.category) ==
            used_categories.end()) {
          break;
        }
      }
      used_categories.push_back(anchor->category);
      Vec center = anchor->embedding;
      for (double& x : center) x += 0.05 * rng.normal();
      center = normalized(center);
      for (const Vec& other : profile.centers) {
        if (dot(center, other) > max_cos) ok = false;
      }
      profile.centers.push_back(std::move(center));
    }
    if (!ok) continue;

    double total = 0.0;
    for (std::size_t g = 0; g < num_interests; ++g) {
      profile.weights.push_back(0.5 + rng.uniform());
      total += profile.weights.back();
    }
    for (double& w : profile.weights) w /= total;
    return profile;
  }
  throw SamplingError("could not place " + std::to_string(num_interests) +
                      " interest centers with the requested separation");
}

BehaviorSequence generate_user_sequence(const UserProfile& profile, const ItemCatalog& catalog,
                                        std::size_t length, double noise_kappa, Rng& rng,
                                        std::vector<std::size_t>* planted) {
  if (length == 0) throw ConfigError("sequence length must be at least 1");
  BehaviorSequence seq{.user_id = profile.user_id};
  seq.events.reserve(length);
  if (planted != nullptr) planted->clear();
  std::int64_t ts = kEpochStart + static_cast<std::int64_t>(rng.uniform_index(86'400));
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t g = draw_weighted(profile.weights, rng);
    const Item& item = catalog.items()[draw_near(profile.centers[g], catalog, noise_kappa, rng)];
    ts += 1 + static_cast<std::int64_t>(rng.uniform_index(3600));
    seq.events.push_back({.item_id = item.id, .timestamp = ts, .category = item.category});
    if (planted != nullptr) planted->push_back(g);
  }
  return seq;
}

double click_probability(const UserProfile& profile, std::span<const double> target,
                         const LabelModel& model) {
  double best = -1.0;
  for (const Vec& c : profile.centers) best = std::max(best, 1.0 - cosine_distance(target, c));
  return sigmoid(model.gamma * best + model.bias);
}

std::vector<LabeledSample> generate_labeled_samples(const UserProfile& profile,
                                                    const ItemCatalog& catalog, std::size_t n_pos,
                                                    std::size_t n_neg, Rng& rng,
                                                    const LabelModel& model) {
  std::vector<LabeledSample> out;
  out.reserve(n_pos + n_neg);
  const auto items = catalog.items();
  for (std::size_t i = 0; i < n_pos + n_neg; ++i) {
    std::size_t idx;
    if (i < n_pos) {
      const std::size_t g = draw_weighted(profile.weights, rng);
      idx = draw_near(profile.centers[g], catalog, model.candidate_kappa, rng);
    } else {
      idx = rng.uniform_index(items.size());
    }
    const Item& target = items[idx];
    const int label = rng.bernoulli(click_probability(profile, target.embedding, model)) ? 1 : 0;
    const Split split = rng.bernoulli(model.test_fraction) ? Split::kTest : Split::kTrain;
    out.push_back({.user_id = profile.user_id, .target_item_id = target.id, .label = label,
                   .split = split});
  }
  return out;
}

GeneratedData generate_dataset(const DatasetParams& params) {
  if (params.n_users == 0) throw ConfigError("need at least one user");
  if (params.length == 0) throw ConfigError("sequence length must be at least 1");
  Rng root(params.seed);
  Rng catalog_rng = root.split(0);
  GeneratedData out;
  out.dataset.catalog = generate_catalog(params.n_items, params.dim, params.n_categories,
                                         catalog_rng);

  struct PerUser {
    UserProfile profile;
    BehaviorSequence sequence;
    std::vector<LabeledSample> samples;
  };
  std::vector<PerUser> users(params.n_users);
  const auto work = [&](std::size_t u) {
    const std::uint64_t user_id = u + 1;
    Rng rng = root.split(1).split(user_id);
    PerUser& slot = users[u];
    slot.profile = generate_profile(user_id, out.dataset.catalog, params.num_interests, rng,
                                    params.min_separation_deg);
    slot.sequence = generate_user_sequence(slot.profile, out.dataset.catalog, params.length,
                                           params.noise_kappa, rng);
    slot.samples = generate_labeled_samples(slot.profile, out.dataset.catalog, params.samples_pos,
                                            params.samples_neg, rng, params.label_model);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(params.parallelism, params.n_users));
  if (workers == 1) {
    for (std::size_t u = 0; u < params.n_users; ++u) work(u);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t u = w; u < params.n_users; u += workers) work(u);
      });
    }
  }

  for (PerUser& u : users) {
    out.profiles.push_back(std::move(u.profile));
    out.dataset.sequences.push_back(std::move(u.sequence));
    for (LabeledSample& s : u.samples) out.dataset.samples.push_back(s);
  }
  return out;
}

std::vector<Vec> sequence_embeddings(const BehaviorSequence& sequence, const ItemCatalog& catalog) {
  std::vector<Vec> out;
  out.reserve(sequence.events.size());
  for (const Event& e : sequence.events) out.push_back(catalog.at(e.item_id).embedding);
  return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");

  Json header;
  header["format"] = "encode-ds";
  header["version"] = kDatasetVersion;
  header["d"] = dataset.catalog.dim();
  header["items"] = dataset.catalog.size();
  header["sequences"] = dataset.sequences.size();
  header["samples"] = dataset.samples.size();
  out << header.dump() << '\n';

  for (const Item& item : dataset.catalog.items()) {
    Json rec;
    rec["kind"] = "item";
    rec["id"] = item.id;
    rec["category"] = item.category;
    rec["embedding"] = item.embedding;
    out << rec.dump() << '\n';
  }
  for (const BehaviorSequence& seq : dataset.sequences) {
    Json rec;
    rec["kind"] = "sequence";
    rec["user"] = seq.user_id;
    Json events = Json::array();
    for (const Event& e : seq.events) events.push_back(Json::array({e.item_id, e.timestamp, e.category}));
    rec["events"] = std::move(events);
    out << rec.dump() << '\n';
  }
  for (const LabeledSample& s : dataset.samples) {
    Json rec;
    rec["kind"] = "sample";
    rec["user"] = s.user_id;
    rec["item"] = s.target_item_id;
    rec["label"] = s.label;
    rec["split"] = s.split == Split::kTest ? "test" : "train";
    out << rec.dump() << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++line_no;

  Dataset ds;
  std::size_t want_items = 0, want_sequences = 0, want_samples = 0;
  try {
    const Json header = Json::parse(line);
    if (header.at("format").get<std::string>() != "encode-ds") {
      throw ParseError(line_no, "not an encode-ds file");
    }
    const int version = header.at("version").get<int>();
    if (version != kDatasetVersion) {
      throw VersionError("dataset version " + std::to_string(version) + " unsupported (want " +
                         std::to_string(kDatasetVersion) + ")");
    }
    ds.catalog = ItemCatalog(header.at("d").get<std::size_t>());
    want_items = header.at("items").get<std::size_t>();
    want_sequences = header.at("sequences").get<std::size_t>();
    want_samples = header.at("samples").get<std::size_t>();
  } catch (const Json::exception& e) {
    throw ParseError(line_no, std::string("bad header: ") + e.what());
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json rec = Json::parse(line);
      const std::string kind = rec.at("kind").get<std::string>();
      if (kind == "item") {
        ds.catalog.add({.id = rec.at("id").get<std::uint64_t>(),
                        .embedding = rec.at("embedding").get<Vec>(),
                        .category = rec.at("category").get<std::uint32_t>()});
      } else if (kind == "sequence") {
        BehaviorSequence seq{.user_id = rec.at("user").get<std::uint64_t>()};
        for (const Json& e : rec.at("events")) {
          if (!e.is_array() || e.size() != 3) throw ParseError(line_no, "event must be [item, ts, category]");
          seq.events.push_back({.item_id = e[0].get<std::uint64_t>(),
                                .timestamp = e[1].get<std::int64_t>(),
                                .category = e[2].get<std::uint32_t>()});
        }
        ds.sequences.push_back(std::move(seq));
      } else if (kind == "sample") {
        const std::string split = rec.at("split").get<std::string>();
        if (split != "train" && split != "test") throw ParseError(line_no, "bad split '" + split + "'");
        const int label = rec.at("label").get<int>();
        if (label != 0 && label != 1) throw ParseError(line_no, "label must be 0 or 1");
        ds.samples.push_back({.user_id = rec.at("user").get<std::uint64_t>(),
                              .target_item_id = rec.at("item").get<std::uint64_t>(),
                              .label = label,
                              .split = split == "test" ? Split::kTest : Split::kTrain});
      } else {
        throw ParseError(line_no, "unknown record kind '" + kind + "'");
      }
    } catch (const Json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
  }

  if (ds.catalog.size() != want_items || ds.sequences.size() != want_sequences ||
      ds.samples.size() != want_samples) {
    throw ParseError(line_no + 1, "truncated: header promises " + std::to_string(want_items) +
                                      " items, " + std::to_string(want_sequences) + " sequences, " +
                                      std::to_string(want_samples) + " samples");
  }
  return ds;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no, std::string_view column) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(line_no, "bad " + std::string(column) + " '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

IngestedLog ingest_event_log(const std::filesystem::path& path, std::size_t embedding_dim,
                             Rng& rng, std::size_t max_length) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("event log has no header row");

  const auto header = split_csv(line);
  const auto column = [&](std::string_view name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("event log is missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_user = column("user_id");
  const std::size_t c_item = column("item_id");
  const std::size_t c_ts = column("timestamp");
  const std::size_t c_cat = column("category");
  const std::size_t width = header.size();

  std::map<std::uint64_t, std::vector<Event>> per_user;
  std::map<std::uint64_t, std::uint32_t> item_category;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != width) {
      throw ParseError(line_no, "expected " + std::to_string(width) + " fields, got " +
                                    std::to_string(fields.size()));
    }
    const auto user = parse_number<std::uint64_t>(fields[c_user], line_no, "user_id");
    const auto item = parse_number<std::uint64_t>(fields[c_item], line_no, "item_id");
    const auto ts = parse_number<std::int64_t>(fields[c_ts], line_no, "timestamp");
    const auto cat = parse_number<std::uint32_t>(fields[c_cat], line_no, "category");
    item_category.try_emplace(item, cat);
    per_user[user].push_back({.item_id = item, .timestamp = ts, .category = cat});
  }

  IngestedLog out{.catalog = ItemCatalog(embedding_dim)};
  for (const auto& [item, cat] : item_category) {
    Rng item_rng = rng.split(item);
    out.catalog.add({.id = item, .embedding = random_unit(embedding_dim, item_rng), .category = cat});
  }
  for (auto& [user, events] : per_user) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    if (events.size() > max_length) {
      events.erase(events.begin(), events.end() - static_cast<std::ptrdiff_t>(max_length));
    }
    out.sequences.push_back({.user_id = user, .events = std::move(events)});
  }
  return out;
}

}  // namespace encode
