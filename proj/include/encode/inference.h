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

// Online stage: target attention of the candidate item over a user's
// precomputed interests, and the logistic scoring head shared by every
// sequence-modeling strategy.

#ifndef ENCODE_INFERENCE_H_
#define ENCODE_INFERENCE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "encode/interest.h"
#include "encode/numerics.h"

namespace encode {

struct OnlineInterest {
  Vec interest;                 // I
  std::vector<double> between;  // softmax over the K' interests
};

// I = sum_i softmax_i(logit(u_i, x_t)) u_i. Touches only the K' interest
// vectors, so its cost does not depend on the behavior-sequence length.
OnlineInterest online_interest(std::span<const Vec> interests, std::span<const double> target,
                               double beta, AttentionMetric metric = AttentionMetric::kUnifiedSim);

struct AttentionTrace {
  std::vector<double> between;        // length K'
  std::vector<double> final_weights;  // length L: within x between
};

struct InterestQuery {
  Vec interest;
  AttentionTrace trace;
};

// online_interest plus the per-behavior trace (empty final weights when the
// set carries no within-cluster weights). Throws EmptyInputError on an empty
// set, DimError on a target of the wrong dimension.
InterestQuery infer_interest(const InterestSet& set, std::span<const double> target, double beta,
                             AttentionMetric metric = AttentionMetric::kUnifiedSim);

// Logistic layer over [I ; x_t ; I*x_t ; (mean real-time embedding) ; 1].
struct ScoringHead {
  std::size_t dim = 0;
  bool realtime_feature = false;
  Vec weights;
  bool trained = false;

  std::size_t num_features() const { return (realtime_feature ? 4 : 3) * dim + 1; }
};

ScoringHead zero_head(std::size_t dim, bool realtime_feature = false);

Vec head_features(const ScoringHead& head, std::span<const double> interest,
                  std::span<const double> target, std::span<const double> realtime = {});

// sigmoid(w . features)
double score(const ScoringHead& head, std::span<const double> interest, std::span<const double> target,
             std::span<const double> realtime = {});

inline constexpr double kProbClamp = 1e-12;

// Binary cross-entropy with the prediction clamped to [1e-12, 1 - 1e-12].
double cross_entropy(double prediction, int label);

struct HeadExample {
  Vec interest;
  Vec target;
  Vec realtime;  // empty unless the head uses the real-time feature
  int label = 0;
};

struct HeadLossAndGrad {
  double loss = 0.0;  // mean cross-entropy
  Vec grad;
};

HeadLossAndGrad head_loss_and_grad(const ScoringHead& head, std::span<const HeadExample> examples);

struct HeadTrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 1024;
  std::size_t epochs = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Adam on mean cross-entropy over shuffled minibatches. The examples carry
// whatever interest vector a strategy produced, so every strategy trains the
// same head. `loss_log` (optional) receives the mean loss of every step.
// Throws TrainingError on a non-finite loss, EmptyInputError on no examples.
ScoringHead train_head(ScoringHead head, std::span<const HeadExample> examples,
                       const HeadTrainConfig& config, Rng& rng, std::vector<double>* loss_log = nullptr);

inline constexpr std::uint16_t kHeadVersion = 1;

// "ENCH" | u16 version | u32 dim | u8 realtime | u8 trained | f64 weights | u32 CRC32
std::vector<std::uint8_t> serialize_head(const ScoringHead& head);
ScoringHead deserialize_head(std::span<const std::uint8_t> bytes);
void write_head(const std::filesystem::path& path, const ScoringHead& head);
ScoringHead read_head(const std::filesystem::path& path);

}  // namespace encode

#endif  // ENCODE_INFERENCE_H_
