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

// Evaluation measures: the relevance indicator, AUC/GAUC, distance
// preservation, and latency summaries with their CSV reports.

#ifndef ENCODE_EVALMETRICS_H_
#define ENCODE_EVALMETRICS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "encode/baselines.h"
#include "encode/numerics.h"
#include "encode/projection.h"

namespace encode {

// -sum p_i log p_i, with 0 log 0 = 0.
double entropy(std::span<const double> p);

inline constexpr double kProbClampRi = 1e-12;

// -sum oracle_i log(max(method_i, 1e-12)). Throws DimError on a length
// mismatch.
double relevance_indicator(std::span<const double> method, std::span<const double> oracle);
double relevance_indicator(const StrategyWeights& method, const StrategyWeights& oracle);

// Mann-Whitney U / (n+ n-), tied scores count one half. Throws
// UndefinedMetricError unless both classes are present, DimError on a
// length mismatch.
double auc(std::span<const double> scores, std::span<const int> labels);

// Impression-weighted mean of per-group AUC; groups with a single class are
// skipped. Throws UndefinedMetricError when no group has both classes.
double gauc(std::span<const double> scores, std::span<const int> labels,
            std::span<const std::uint64_t> groups);

// Fraction of `n_trials` random ordered triples (i, j, k) of distinct
// behaviors whose distance order dis(.,j) vs dis(.,k) from i agrees between
// the original and the projected space. Exact ties count as agreement.
// Throws EmptyInputError with fewer than three behaviors.
double triplet_agreement(const ProjectionModel& projection, std::span<const Vec> s, std::size_t n_trials,
                         Rng& rng);
// Triples drawn within one sequence each, sequence chosen uniformly.
double triplet_agreement(const ProjectionModel& projection, std::span<const std::vector<Vec>> sequences,
                         std::size_t n_trials, Rng& rng);

struct LatencySummary {
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
};

// Nearest-rank percentiles. Throws EmptyInputError.
LatencySummary summarize_latencies(std::vector<double> samples);

struct BenchRecord {
  std::string strategy;
  std::size_t length = 0;      // L
  std::size_t k = 0;           // K' for ENCODE, k or M for truncating strategies, 0 otherwise
  LatencySummary micros;       // per batch of targets
  double metric_evals = 0.0;   // similarity evaluations per target
};

struct RiRecord {
  std::string strategy;
  std::uint64_t seed = 0;
  std::size_t pairs = 0;
  double ri = 0.0;              // mean over pairs
  double oracle_entropy = 0.0;  // mean over pairs; lower bound of ri
};

struct AucRecord {
  std::string strategy;
  std::uint64_t seed = 0;
  double auc = 0.0;
  double gauc = 0.0;
  double final_loss = 0.0;  // training cross-entropy of the last step
};

inline constexpr std::string_view kBenchHeader = "strategy,L,K,p50_us,p95_us,p99_us,metric_evals";
inline constexpr std::string_view kRiHeader = "strategy,seed,pairs,ri,oracle_entropy";
inline constexpr std::string_view kAucHeader = "strategy,seed,auc,gauc,final_loss";

std::string format_bench_csv(std::span<const BenchRecord> records);
std::string format_ri_csv(std::span<const RiRecord> records);
std::string format_auc_csv(std::span<const AucRecord> records);

// Atomic write of `text`.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace encode

#endif  // ENCODE_EVALMETRICS_H_
