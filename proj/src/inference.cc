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

#include "encode/inference.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "encode/binary_io.h"
#include "encode/errors.h"

namespace encode {

OnlineInterest online_interest(std::span<const Vec> interests, std::span<const double> target,
                               double beta, AttentionMetric metric) {
  if (interests.empty()) throw EmptyInputError("no interests to attend over");
  std::vector<double> logits;
  logits.reserve(interests.size());
  for (const Vec& u : interests) logits.push_back(attention_logit(metric, target, u, beta));
  OnlineInterest out{.interest = Vec(target.size(), 0.0), .between = softmax(logits)};
  for (std::size_t i = 0; i < interests.size(); ++i) axpy(out.between[i], interests[i], out.interest);
  return out;
}

InterestQuery infer_interest(const InterestSet& set, std::span<const double> target, double beta,
                             AttentionMetric metric) {
  if (set.interests.empty()) throw EmptyInputError("interest set is empty");
  if (target.size() != set.dim()) throw DimError("target dim does not match interest dim");
  OnlineInterest online = online_interest(set.interests, target, beta, metric);
  InterestQuery out{.interest = std::move(online.interest)};
  out.trace.final_weights.reserve(set.within.size());
  for (const WithinWeight& w : set.within) {
    out.trace.final_weights.push_back(w.weight * online.between[w.cluster]);
  }
  out.trace.between = std::move(online.between);
  return out;
}

ScoringHead zero_head(std::size_t dim, bool realtime_feature) {
  ScoringHead head{.dim = dim, .realtime_feature = realtime_feature};
  head.weights.assign(head.num_features(), 0.0);
  return head;
}

Vec head_features(const ScoringHead& head, std::span<const double> interest,
                  std::span<const double> target, std::span<const double> realtime) {
  if (interest.size() != head.dim || target.size() != head.dim) {
    throw DimError("head expects dim " + std::to_string(head.dim));
  }
  if (head.realtime_feature && realtime.size() != head.dim) {
    throw DimError("head expects a real-time feature of dim " + std::to_string(head.dim));
  }
  Vec f;
  f.reserve(head.num_features());
  f.insert(f.end(), interest.begin(), interest.end());
  f.insert(f.end(), target.begin(), target.end());
  for (std::size_t i = 0; i < head.dim; ++i) f.push_back(interest[i] * target[i]);
  if (head.realtime_feature) f.insert(f.end(), realtime.begin(), realtime.end());
  f.push_back(1.0);
  return f;
}

double score(const ScoringHead& head, std::span<const double> interest, std::span<const double> target,
             std::span<const double> realtime) {
  return sigmoid(dot(head.weights, head_features(head, interest, target, realtime)));
}

double cross_entropy(double prediction, int label) {
  const double p = std::clamp(prediction, kProbClamp, 1.0 - kProbClamp);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

HeadLossAndGrad head_loss_and_grad(const ScoringHead& head, std::span<const HeadExample> examples) {
  if (examples.empty()) throw EmptyInputError("no examples");
  HeadLossAndGrad out{.grad = Vec(head.num_features(), 0.0)};
  std::vector<double> losses;
  losses.reserve(examples.size());
  const double inv = 1.0 / static_cast<double>(examples.size());
  for (const HeadExample& ex : examples) {
    const Vec f = head_features(head, ex.interest, ex.target, ex.realtime);
    const double p = sigmoid(dot(head.weights, f));
    losses.push_back(cross_entropy(p, ex.label));
    axpy((p - ex.label) * inv, f, out.grad);
  }
  out.loss = pairwise_sum(losses) * inv;
  return out;
}

ScoringHead train_head(ScoringHead head, std::span<const HeadExample> examples,
                       const HeadTrainConfig& config, Rng& rng, std::vector<double>* loss_log) {
  if (config.epochs == 0) return head;
  if (examples.empty()) throw EmptyInputError("no training examples");
  if (config.batch_size == 0) throw ConfigError("batch size must be positive");

  Vec m1(head.weights.size(), 0.0), m2(head.weights.size(), 0.0);
  double b1_pow = 1.0, b2_pow = 1.0;
  std::vector<std::size_t> order(examples.size());
  std::vector<HeadExample> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
      const HeadLossAndGrad lg = head_loss_and_grad(head, batch);
      if (!std::isfinite(lg.loss)) throw TrainingError("non-finite cross-entropy");
      if (loss_log != nullptr) loss_log->push_back(lg.loss);
      b1_pow *= config.adam_beta1;
      b2_pow *= config.adam_beta2;
      for (std::size_t k = 0; k < head.weights.size(); ++k) {
        m1[k] = config.adam_beta1 * m1[k] + (1.0 - config.adam_beta1) * lg.grad[k];
        m2[k] = config.adam_beta2 * m2[k] + (1.0 - config.adam_beta2) * lg.grad[k] * lg.grad[k];
        const double mhat = m1[k] / (1.0 - b1_pow);
        const double vhat = m2[k] / (1.0 - b2_pow);
        head.weights[k] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
      }
    }
  }
  head.trained = true;
  return head;
}

std::vector<std::uint8_t> serialize_head(const ScoringHead& head) {
  ByteWriter w;
  w.put_magic("ENCH");
  w.put_u16(kHeadVersion);
  w.put_u32(static_cast<std::uint32_t>(head.dim));
  w.put_u8(head.realtime_feature ? 1 : 0);
  w.put_u8(head.trained ? 1 : 0);
  for (double v : head.weights) w.put_f64(v);
  const std::uint32_t crc = crc32(w.bytes());
  w.put_u32(crc);
  return w.take();
}

ScoringHead deserialize_head(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "scoring head");
  if (!r.expect_magic("ENCH")) throw CorruptStoreError("scoring head: bad magic");
  const std::uint16_t version = r.get_u16();
  if (version != kHeadVersion) throw VersionError("scoring head version " + std::to_string(version));
  const std::uint32_t dim = r.get_u32();
  const bool realtime = r.get_u8() != 0;
  ScoringHead head = zero_head(dim, realtime);
  head.trained = r.get_u8() != 0;
  if (r.remaining() != head.num_features() * 8 + 4) throw CorruptStoreError("scoring head: bad size");
  for (double& v : head.weights) v = r.get_f64();
  const std::size_t body = r.position();
  if (r.get_u32() != crc32(bytes.subspan(0, body))) throw CorruptStoreError("scoring head: CRC mismatch");
  for (double v : head.weights) {
    if (!std::isfinite(v)) throw CorruptStoreError("scoring head: non-finite weight");
  }
  return head;
}

void write_head(const std::filesystem::path& path, const ScoringHead& head) {
  write_file_atomic(path, serialize_head(head));
}

ScoringHead read_head(const std::filesystem::path& path) { return deserialize_head(read_file(path)); }

}  // namespace encode
