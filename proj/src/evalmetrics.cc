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

#include "encode/evalmetrics.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "encode/binary_io.h"
#include "encode/errors.h"

namespace encode {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

int sign(double x) { return (x > 0.0) - (x < 0.0); }

bool triple_agrees(const Vec& si, const Vec& sj, const Vec& sk, const Vec& hi, const Vec& hj,
                   const Vec& hk) {
  const int orig = sign(cosine_distance(si, sj) - cosine_distance(si, sk));
  const int proj = sign(cosine_distance(hi, hj) - cosine_distance(hi, hk));
  return orig == 0 || proj == 0 || orig == proj;
}

// Three distinct indices below n.
std::array<std::size_t, 3> draw_triple(std::size_t n, Rng& rng) {
  const std::size_t i = rng.uniform_index(n);
  std::size_t j = rng.uniform_index(n - 1);
  if (j >= i) ++j;
  std::size_t k = rng.uniform_index(n - 2);
  for (std::size_t skip : {std::min(i, j), std::max(i, j)}) {
    if (k >= skip) ++k;
  }
  return {i, j, k};
}

}  // namespace

double entropy(std::span<const double> p) {
  std::vector<double> terms;
  terms.reserve(p.size());
  for (double x : p) {
    if (x > 0.0) terms.push_back(-x * std::log(x));
  }
  return pairwise_sum(terms);
}

double relevance_indicator(std::span<const double> method, std::span<const double> oracle) {
  if (method.size() != oracle.size()) throw DimError("weight vectors differ in length");
  std::vector<double> terms(method.size());
  for (std::size_t i = 0; i < method.size(); ++i) {
    terms[i] = -oracle[i] * std::log(std::max(method[i], kProbClampRi));
  }
  return pairwise_sum(terms);
}

double relevance_indicator(const StrategyWeights& method, const StrategyWeights& oracle) {
  return relevance_indicator(method.weights, oracle.weights);
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimError("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double n_pos = 0.0, n_neg = 0.0, pos_rank_sum = 0.0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) ++end;
    // 1-based ranks start+1..end share their mean.
    const double rank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t i = start; i < end; ++i) {
      const int y = labels[order[i]];
      if (y == 1) {
        n_pos += 1.0;
        pos_rank_sum += rank;
      } else if (y == 0) {
        n_neg += 1.0;
      } else {
        throw ConfigError("labels must be 0 or 1");
      }
    }
    start = end;
  }
  if (n_pos == 0.0 || n_neg == 0.0) throw UndefinedMetricError("AUC needs both classes");
  return (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double gauc(std::span<const double> scores, std::span<const int> labels,
            std::span<const std::uint64_t> groups) {
  if (scores.size() != labels.size() || scores.size() != groups.size()) {
    throw DimError("scores, labels and groups differ in length");
  }
  std::map<std::uint64_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);
  std::vector<double> weighted;
  double impressions = 0.0;
  for (const auto& [group, idx] : members) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i : idx) {
      s.push_back(scores[i]);
      y.push_back(labels[i]);
    }
    const bool has_pos = std::count(y.begin(), y.end(), 1) > 0;
    const bool has_neg = std::count(y.begin(), y.end(), 0) > 0;
    if (!has_pos || !has_neg) continue;
    weighted.push_back(static_cast<double>(idx.size()) * auc(s, y));
    impressions += static_cast<double>(idx.size());
  }
  if (weighted.empty()) throw UndefinedMetricError("no group has both classes");
  return pairwise_sum(weighted) / impressions;
}

double triplet_agreement(const ProjectionModel& projection, std::span<const Vec> s, std::size_t n_trials,
                         Rng& rng) {
  const std::vector<Vec> one(s.begin(), s.end());
  return triplet_agreement(projection, std::span<const std::vector<Vec>>(&one, 1), n_trials, rng);
}

double triplet_agreement(const ProjectionModel& projection, std::span<const std::vector<Vec>> sequences,
                         std::size_t n_trials, Rng& rng) {
  if (n_trials == 0) throw ConfigError("need at least one trial");
  std::vector<std::size_t> usable;
  for (std::size_t q = 0; q < sequences.size(); ++q) {
    if (sequences[q].size() >= 3) usable.push_back(q);
  }
  if (usable.empty()) throw EmptyInputError("triplet agreement needs a sequence of three behaviors");
  std::size_t agree = 0;
  for (std::size_t t = 0; t < n_trials; ++t) {
    const std::vector<Vec>& seq = sequences[usable[rng.uniform_index(usable.size())]];
    const auto [i, j, k] = draw_triple(seq.size(), rng);
    if (triple_agrees(seq[i], seq[j], seq[k], project(projection, seq[i]), project(projection, seq[j]),
                      project(projection, seq[k]))) {
      ++agree;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(n_trials);
}

LatencySummary summarize_latencies(std::vector<double> samples) {
  if (samples.empty()) throw EmptyInputError("no latency samples");
  std::sort(samples.begin(), samples.end());
  const auto rank = [&](double q) {
    const auto r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
    return samples[std::clamp<std::size_t>(r, 1, samples.size()) - 1];
  };
  return {.p50 = rank(0.50), .p95 = rank(0.95), .p99 = rank(0.99)};
}

std::string format_bench_csv(std::span<const BenchRecord> records) {
  std::string out(kBenchHeader);
  out += '\n';
  for (const BenchRecord& r : records) {
    out += r.strategy + ',' + std::to_string(r.length) + ',' + std::to_string(r.k) + ',' + fmt(r.micros.p50) +
           ',' + fmt(r.micros.p95) + ',' + fmt(r.micros.p99) + ',' + fmt(r.metric_evals) + '\n';
  }
  return out;
}

std::string format_ri_csv(std::span<const RiRecord> records) {
  std::string out(kRiHeader);
  out += '\n';
  for (const RiRecord& r : records) {
    out += r.strategy + ',' + std::to_string(r.seed) + ',' + std::to_string(r.pairs) + ',' + fmt(r.ri) + ',' +
           fmt(r.oracle_entropy) + '\n';
  }
  return out;
}

std::string format_auc_csv(std::span<const AucRecord> records) {
  std::string out(kAucHeader);
  out += '\n';
  for (const AucRecord& r : records) {
    out += r.strategy + ',' + std::to_string(r.seed) + ',' + fmt(r.auc) + ',' + fmt(r.gauc) + ',' +
           fmt(r.final_loss) + '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace encode
