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

#include "encode/experiment.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <thread>

#include "encode/errors.h"

namespace encode {
namespace {

struct StrategyTag {
  StrategyKind kind;
  std::string_view tag;
};

constexpr StrategyTag kTags[] = {
    {StrategyKind::kEncode, "encode"},         {StrategyKind::kEncodeMinus, "encode_minus"},
    {StrategyKind::kDinL, "din_l"},            {StrategyKind::kDinShort, "din_short"},
    {StrategyKind::kAvgPooling, "avg_pooling"}, {StrategyKind::kSimHard, "sim_hard"},
    {StrategyKind::kEta, "eta"},               {StrategyKind::kEtaEncode, "eta_encode"},
    {StrategyKind::kEtaTa, "eta_ta"},          {StrategyKind::kTwin, "twin"},
    {StrategyKind::kSdim, "sdim"},
};

bool wants(std::span<const StrategyKind> kinds, StrategyKind k) {
  return std::find(kinds.begin(), kinds.end(), k) != kinds.end();
}

// Runs fn(i) for i in [0, n) on up to `parallelism` threads.
void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn) {
  parallelism = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(n, 1));
  if (parallelism == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(parallelism);
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < parallelism; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < n; i = next++) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
          next = n;
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::map<std::uint64_t, std::size_t> index_sequences(const Dataset& dataset) {
  std::map<std::uint64_t, std::size_t> out;
  for (std::size_t i = 0; i < dataset.sequences.size(); ++i) out[dataset.sequences[i].user_id] = i;
  return out;
}

// Samples grouped by user, in order of first appearance; the per-user lists
// keep dataset order.
std::vector<std::vector<std::size_t>> group_samples(const Dataset& dataset, std::size_t max_pairs) {
  std::map<std::uint64_t, std::size_t> slot;
  std::vector<std::vector<std::size_t>> groups;
  const std::size_t n = max_pairs == 0 ? dataset.samples.size() : std::min(max_pairs, dataset.samples.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = slot.emplace(dataset.samples[i].user_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

std::vector<StrategyKind> with_oracle(std::span<const StrategyKind> kinds) {
  std::vector<StrategyKind> out(kinds.begin(), kinds.end());
  if (!wants(out, StrategyKind::kDinL)) out.push_back(StrategyKind::kDinL);
  return out;
}

ExtractionConfig minus_config(const ExtractionConfig& config) {
  ExtractionConfig out = config;
  out.metric = AttentionMetric::kScaledDot;
  return out;
}

Vec mean_of_recent(std::span<const Vec> s, std::size_t m) {
  const std::size_t n = std::min(m, s.size());
  Vec out(s.front().size(), 0.0);
  for (std::size_t i = s.size() - n; i < s.size(); ++i) axpy(1.0 / static_cast<double>(n), s[i], out);
  return out;
}

}  // namespace

AttentionMetric parse_metric(std::string_view tag) {
  if (tag == "unified-sim" || tag == "unified_sim") return AttentionMetric::kUnifiedSim;
  if (tag == "scaled-dot" || tag == "scaled_dot") return AttentionMetric::kScaledDot;
  throw ConfigError("unknown metric '" + std::string(tag) + "'");
}

std::string_view to_string(AttentionMetric metric) {
  return metric == AttentionMetric::kUnifiedSim ? "unified-sim" : "scaled-dot";
}

StrategyKind parse_strategy(std::string_view tag) {
  std::string snake(tag);
  std::replace(snake.begin(), snake.end(), '-', '_');
  for (const StrategyTag& t : kTags) {
    if (t.tag == snake) return t.kind;
  }
  throw ConfigError("unknown strategy '" + std::string(tag) + "'");
}

std::string_view to_string(StrategyKind kind) {
  for (const StrategyTag& t : kTags) {
    if (t.kind == kind) return t.tag;
  }
  return "unknown";
}

std::vector<StrategyKind> all_strategies() {
  std::vector<StrategyKind> out;
  for (const StrategyTag& t : kTags) out.push_back(t.kind);
  return out;
}

std::vector<StrategyKind> parse_strategy_list(std::string_view comma_separated) {
  std::vector<StrategyKind> out;
  std::size_t start = 0;
  while (start <= comma_separated.size()) {
    const std::size_t end = std::min(comma_separated.find(',', start), comma_separated.size());
    const std::string_view tag = comma_separated.substr(start, end - start);
    if (!tag.empty()) {
      const StrategyKind k = parse_strategy(tag);
      if (!wants(out, k)) out.push_back(k);
    }
    start = end + 1;
  }
  if (out.empty()) throw ConfigError("empty strategy list");
  return out;
}

StrategyEnv make_env(ProjectionModel projection, const ExtractionConfig& extraction, std::size_t hash_bits,
                     std::uint64_t hash_seed) {
  Rng rng(hash_seed);
  StrategyEnv env{.projection = std::move(projection), .extraction = extraction};
  env.hash_matrix = make_hash_matrix(env.projection.d(), hash_bits, rng);
  return env;
}

UserArtifacts prepare_user(const StrategyEnv& env, const BehaviorSequence& sequence, const ItemCatalog& catalog,
                           std::span<const StrategyKind> kinds) {
  UserArtifacts user{.user_id = sequence.user_id, .s = sequence_embeddings(sequence, catalog)};
  if (user.s.empty()) throw EmptyInputError("user " + std::to_string(sequence.user_id) + " has no behaviors");
  user.categories.reserve(sequence.events.size());
  for (const Event& e : sequence.events) user.categories.push_back(e.category);
  if (wants(kinds, StrategyKind::kEncode)) {
    user.encode_set = extract_interests(sequence, catalog, env.projection, env.extraction);
  }
  if (wants(kinds, StrategyKind::kEncodeMinus)) {
    user.encode_minus_set = extract_interests(sequence, catalog, env.projection, minus_config(env.extraction));
  }
  if (wants(kinds, StrategyKind::kEta) || wants(kinds, StrategyKind::kSdim)) {
    user.codes = simhash(user.s, env.hash_matrix);
  }
  if (wants(kinds, StrategyKind::kEtaEncode)) {
    user.projected.reserve(user.s.size());
    for (const Vec& e : user.s) user.projected.push_back(project(env.projection, e));
  }
  return user;
}

StrategyWeights strategy_weights(StrategyKind kind, const StrategyEnv& env, const UserArtifacts& user,
                                 const Item& target) {
  const std::span<const double> x = target.embedding;
  const double beta = env.extraction.beta;
  switch (kind) {
    case StrategyKind::kEncode:
    case StrategyKind::kEncodeMinus: {
      const bool minus = kind == StrategyKind::kEncodeMinus;
      const InterestSet& set = minus ? user.encode_minus_set : user.encode_set;
      const AttentionMetric metric = minus ? AttentionMetric::kScaledDot : env.extraction.metric;
      if (set.within.size() != user.s.size()) throw ConfigError("ENCODE artifacts were not prepared");
      InterestQuery q = infer_interest(set, x, beta, metric);
      return {.weights = std::move(q.trace.final_weights), .mask = std::vector<bool>(user.s.size(), true)};
    }
    case StrategyKind::kDinL:
      return din_l_weights(user.s, x, AttentionMetric::kScaledDot, beta);
    case StrategyKind::kDinShort:
      return din_short_weights(user.s, x, env.short_length);
    case StrategyKind::kAvgPooling:
      return avg_pooling_weights(user.s.size());
    case StrategyKind::kSimHard:
      return sim_hard_weights(user.s, user.categories, x, target.category, env.top_k);
    case StrategyKind::kEta:
      return eta_weights(user.s, user.codes, x, env.hash_matrix, env.top_k);
    case StrategyKind::kEtaEncode:
      return eta_encode_weights(user.s, user.projected, x, env.projection, env.top_k);
    case StrategyKind::kEtaTa:
    case StrategyKind::kTwin:
      return twin_weights(user.s, x, env.top_k);
    case StrategyKind::kSdim:
      return sdim_weights(user.codes, x, env.hash_matrix, env.slice_width);
  }
  throw ConfigError("unknown strategy");
}

Vec strategy_interest(StrategyKind kind, const StrategyEnv& env, const UserArtifacts& user, const Item& target) {
  if (kind == StrategyKind::kEncode || kind == StrategyKind::kEncodeMinus) {
    const bool minus = kind == StrategyKind::kEncodeMinus;
    const InterestSet& set = minus ? user.encode_minus_set : user.encode_set;
    const AttentionMetric metric = minus ? AttentionMetric::kScaledDot : env.extraction.metric;
    return online_interest(set.interests, target.embedding, env.extraction.beta, metric).interest;
  }
  return strategy_interest(strategy_weights(kind, env, user, target), user.s);
}

std::vector<RiRecord> evaluate_ri(const Dataset& dataset, const StrategyEnv& env,
                                  std::span<const StrategyKind> kinds, std::uint64_t seed, std::size_t max_pairs,
                                  std::size_t parallelism) {
  const auto seq_index = index_sequences(dataset);
  const auto groups = group_samples(dataset, max_pairs);
  const std::vector<StrategyKind> needed = with_oracle(kinds);
  // ri[g][kind][pair], entropy[g][pair]
  std::vector<std::vector<std::vector<double>>> ri(groups.size());
  std::vector<std::vector<double>> ent(groups.size());
  parallel_for(groups.size(), parallelism, [&](std::size_t g) {
    const std::uint64_t user_id = dataset.samples[groups[g].front()].user_id;
    const auto it = seq_index.find(user_id);
    if (it == seq_index.end()) throw NotFoundError("no sequence for user " + std::to_string(user_id));
    const UserArtifacts user = prepare_user(env, dataset.sequences[it->second], dataset.catalog, needed);
    ri[g].assign(kinds.size(), {});
    for (std::size_t idx : groups[g]) {
      const Item& target = dataset.catalog.at(dataset.samples[idx].target_item_id);
      const StrategyWeights oracle = strategy_weights(StrategyKind::kDinL, env, user, target);
      ent[g].push_back(entropy(oracle.weights));
      for (std::size_t k = 0; k < kinds.size(); ++k) {
        ri[g][k].push_back(relevance_indicator(strategy_weights(kinds[k], env, user, target), oracle));
      }
    }
  });
  std::vector<double> all_ent;
  for (const auto& e : ent) all_ent.insert(all_ent.end(), e.begin(), e.end());
  if (all_ent.empty()) throw EmptyInputError("no (user, target) pairs to evaluate");
  const double n = static_cast<double>(all_ent.size());
  std::vector<RiRecord> out;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    std::vector<double> values;
    for (const auto& per_group : ri) values.insert(values.end(), per_group[k].begin(), per_group[k].end());
    out.push_back({.strategy = std::string(to_string(kinds[k])),
                   .seed = seed,
                   .pairs = all_ent.size(),
                   .ri = pairwise_sum(values) / n,
                   .oracle_entropy = pairwise_sum(all_ent) / n});
  }
  return out;
}

namespace {

// examples[kind][sample]
std::vector<std::vector<HeadExample>> build_examples(const Dataset& dataset, const StrategyEnv& env,
                                                     std::span<const StrategyKind> kinds, bool realtime_feature,
                                                     std::size_t parallelism) {
  const auto seq_index = index_sequences(dataset);
  const auto groups = group_samples(dataset, 0);
  // examples[kind][sample]
  std::vector<std::vector<HeadExample>> examples(kinds.size(),
                                                 std::vector<HeadExample>(dataset.samples.size()));
  parallel_for(groups.size(), parallelism, [&](std::size_t g) {
    const std::uint64_t user_id = dataset.samples[groups[g].front()].user_id;
    const auto it = seq_index.find(user_id);
    if (it == seq_index.end()) throw NotFoundError("no sequence for user " + std::to_string(user_id));
    const UserArtifacts user = prepare_user(env, dataset.sequences[it->second], dataset.catalog, kinds);
    const Vec realtime = realtime_feature ? mean_of_recent(user.s, env.short_length) : Vec{};
    for (std::size_t idx : groups[g]) {
      const LabeledSample& sample = dataset.samples[idx];
      const Item& target = dataset.catalog.at(sample.target_item_id);
      for (std::size_t k = 0; k < kinds.size(); ++k) {
        examples[k][idx] = {.interest = strategy_interest(kinds[k], env, user, target),
                            .target = target.embedding,
                            .realtime = realtime,
                            .label = sample.label};
      }
    }
  });
  return examples;
}

}  // namespace

std::vector<HeadExample> head_examples(const Dataset& dataset, const StrategyEnv& env, StrategyKind kind,
                                       bool realtime_feature, std::optional<Split> split,
                                       std::size_t parallelism) {
  const StrategyKind kinds[] = {kind};
  std::vector<HeadExample> all = std::move(build_examples(dataset, env, kinds, realtime_feature, parallelism)[0]);
  if (!split) return all;
  std::vector<HeadExample> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (dataset.samples[i].split == *split) out.push_back(std::move(all[i]));
  }
  return out;
}

std::vector<AucRecord> evaluate_auc(const Dataset& dataset, const StrategyEnv& env,
                                    std::span<const StrategyKind> kinds, const HeadProtocol& protocol,
                                    std::uint64_t seed, std::size_t parallelism) {
  const auto examples = build_examples(dataset, env, kinds, protocol.realtime_feature, parallelism);
  std::vector<AucRecord> out;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    std::vector<HeadExample> train;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      if (dataset.samples[i].split == Split::kTrain) train.push_back(examples[k][i]);
    }
    Rng rng(protocol.shuffle_seed);
    std::vector<double> losses;
    const ScoringHead head = train_head(zero_head(dataset.catalog.dim(), protocol.realtime_feature), train,
                                        protocol.train, rng, &losses);
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<std::uint64_t> users;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      if (dataset.samples[i].split != Split::kTest) continue;
      const HeadExample& ex = examples[k][i];
      scores.push_back(score(head, ex.interest, ex.target, ex.realtime));
      labels.push_back(ex.label);
      users.push_back(dataset.samples[i].user_id);
    }
    out.push_back({.strategy = std::string(to_string(kinds[k])),
                   .seed = seed,
                   .auc = auc(scores, labels),
                   .gauc = gauc(scores, labels, users),
                   .final_loss = losses.empty() ? 0.0 : losses.back()});
  }
  return out;
}

std::vector<BenchRecord> run_bench(const StrategyEnv& env, std::span<const StrategyKind> kinds,
                                   const BenchConfig& config) {
  if (config.lengths.empty() || config.repetitions == 0 || config.batch == 0) {
    throw ConfigError("bench needs lengths, repetitions and a batch size");
  }
  const Rng root(config.seed);
  Rng catalog_rng = root.split(0);
  const ItemCatalog catalog =
      generate_catalog(config.n_items, env.projection.d(), config.n_categories, catalog_rng);
  std::vector<BenchRecord> out;
  for (std::size_t length : config.lengths) {
    Rng rng = root.split(1).split(length);
    const UserProfile profile = generate_profile(1, catalog, config.num_interests, rng);
    const BehaviorSequence sequence = generate_user_sequence(profile, catalog, length, config.noise_kappa, rng);
    const UserArtifacts user = prepare_user(env, sequence, catalog, kinds);
    std::vector<const Item*> targets;
    for (std::size_t b = 0; b < config.batch; ++b) targets.push_back(&catalog.items()[rng.uniform_index(catalog.size())]);

    for (StrategyKind kind : kinds) {
      double sink = 0.0;
      const auto run_batch = [&] {
        for (const Item* t : targets) sink += strategy_interest(kind, env, user, *t)[0];
      };
      reset_metric_counters();
      run_batch();
      const MetricCounters counts = metric_counters();
      for (std::size_t w = 0; w < config.warmup; ++w) run_batch();
      std::vector<double> micros;
      micros.reserve(config.repetitions);
      for (std::size_t r = 0; r < config.repetitions; ++r) {
        const auto start = std::chrono::steady_clock::now();
        run_batch();
        const auto stop = std::chrono::steady_clock::now();
        micros.push_back(std::chrono::duration<double, std::micro>(stop - start).count());
      }
      volatile double keep = sink;
      static_cast<void>(keep);

      std::size_t k = 0;
      switch (kind) {
        case StrategyKind::kEncode: k = user.encode_set.interests.size(); break;
        case StrategyKind::kEncodeMinus: k = user.encode_minus_set.interests.size(); break;
        case StrategyKind::kDinShort: k = env.short_length; break;
        case StrategyKind::kSimHard:
        case StrategyKind::kEta:
        case StrategyKind::kEtaEncode:
        case StrategyKind::kEtaTa:
        case StrategyKind::kTwin: k = env.top_k; break;
        default: break;
      }
      out.push_back({.strategy = std::string(to_string(kind)),
                     .length = length,
                     .k = k,
                     .micros = summarize_latencies(std::move(micros)),
                     .metric_evals = static_cast<double>(counts.cosine + counts.scaled_dot) /
                                     static_cast<double>(targets.size())});
    }
  }
  return out;
}

}  // namespace encode
