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

#include "encode/projection.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "encode/binary_io.h"
#include "encode/errors.h"

namespace encode {

namespace {

// Adds scale * d dis(a, b) / da to ga and scale * d dis(a, b) / db to gb,
// where dis is the cosine distance.
void add_cosine_distance_grad(const Vec& a, const Vec& b, double scale, Vec& ga, Vec& gb) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw ZeroNormError("projected behavior has zero norm");
  const double inv = 1.0 / (na * nb);
  const double c = dot(a, b) * inv;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ga[k] -= scale * (b[k] * inv - c * a[k] / (na * na));
    gb[k] -= scale * (a[k] * inv - c * b[k] / (nb * nb));
  }
}

// Distinct candidate indices (excluding the anchor) from the strategy pool.
std::vector<std::size_t> draw_candidates(const EmbeddingBatch& s, std::size_t anchor,
                                         SamplingStrategy strategy, std::size_t count, Rng& rng) {
  if (anchor >= s.size()) throw SamplingError("anchor index out of range");
  const auto [begin, end] = s.segment_of(anchor);
  std::vector<std::size_t> out;
  out.reserve(count);
  const auto add_unique = [&](std::size_t c) {
    if (c != anchor && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  };

  std::size_t lo = begin, hi = end;
  if (strategy == SamplingStrategy::kWithinBatch) {
    lo = 0;
    hi = s.size();
  }
  if (hi - lo < count + 1) {
    throw SamplingError("pool of " + std::to_string(hi - lo - 1) + " candidates cannot supply " +
                        std::to_string(count));
  }
  if (strategy == SamplingStrategy::kWithinNeighbors) {
    if (anchor > begin) add_unique(anchor - 1);
    if (anchor + 1 < end) add_unique(anchor + 1);
    if (out.size() > count) out.resize(count);
  }
  while (out.size() < count) add_unique(lo + rng.uniform_index(hi - lo));
  return out;
}

std::size_t closest(std::span<const std::size_t> cands, std::span<const double> dist) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < cands.size(); ++i) {
    if (dist[i] < dist[best] || (dist[i] == dist[best] && cands[i] < cands[best])) best = i;
  }
  return best;
}

}  // namespace

ProjectionModel init_projection(std::size_t d, std::size_t m, Rng& rng) {
  if (m < 1 || m > d) {
    throw DimError("projection needs 1 <= m <= d (got d=" + std::to_string(d) +
                   ", m=" + std::to_string(m) + ")");
  }
  ProjectionModel model{.weights = Mat(d, m), .init_seed = rng.seed()};
  for (double& w : model.weights.values()) w = rng.normal();
  return model;
}

Vec project(const ProjectionModel& model, std::span<const double> e) {
  return matvec_t(model.weights, e);
}

LossKind parse_loss_kind(std::string_view tag) {
  if (tag == "none") return LossKind::kNone;
  if (tag == "mse") return LossKind::kMse;
  if (tag == "n-pair-mc" || tag == "n_pair_mc") return LossKind::kNPairMc;
  if (tag == "triplets-fixed" || tag == "triplets_fixed") return LossKind::kTripletsFixed;
  if (tag == "triplets-dynamic" || tag == "triplets_dynamic") return LossKind::kTripletsDynamic;
  throw ConfigError("unknown loss '" + std::string(tag) + "'");
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kNone: return "none";
    case LossKind::kMse: return "mse";
    case LossKind::kNPairMc: return "n-pair-mc";
    case LossKind::kTripletsFixed: return "triplets-fixed";
    case LossKind::kTripletsDynamic: return "triplets-dynamic";
  }
  return "?";
}

SamplingStrategy parse_sampling(std::string_view tag) {
  if (tag == "within-neighbors" || tag == "within_neighbors") return SamplingStrategy::kWithinNeighbors;
  if (tag == "within-sequence" || tag == "within_sequence") return SamplingStrategy::kWithinSequence;
  if (tag == "within-batch" || tag == "within_batch") return SamplingStrategy::kWithinBatch;
  throw ConfigError("unknown sampling strategy '" + std::string(tag) + "'");
}

std::string_view to_string(SamplingStrategy strategy) {
  switch (strategy) {
    case SamplingStrategy::kWithinNeighbors: return "within-neighbors";
    case SamplingStrategy::kWithinSequence: return "within-sequence";
    case SamplingStrategy::kWithinBatch: return "within-batch";
  }
  return "?";
}

void EmbeddingBatch::add_sequence(std::span<const Vec> sequence) {
  if (sequence.empty()) return;
  sequences_.push_back(sequence);
  offsets_.push_back(offsets_.back() + sequence.size());
}

const Vec& EmbeddingBatch::operator[](std::size_t flat) const {
  if (flat >= size()) throw DimError("batch index out of range");
  const auto seq = static_cast<std::size_t>(
      std::upper_bound(offsets_.begin(), offsets_.end(), flat) - offsets_.begin() - 1);
  return sequences_[seq][flat - offsets_[seq]];
}

std::pair<std::size_t, std::size_t> EmbeddingBatch::segment_of(std::size_t flat) const {
  if (flat >= size()) throw DimError("batch index out of range");
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat);
  return {*(it - 1), *it};
}

Triplet select_triplet(const EmbeddingBatch& s, std::size_t anchor, SamplingStrategy strategy,
                       Rng& rng) {
  const auto cands = draw_candidates(s, anchor, strategy, 2, rng);
  const double dist[2] = {cosine_distance(s[anchor], s[cands[0]]),
                          cosine_distance(s[anchor], s[cands[1]])};
  const std::size_t p = closest(cands, dist);
  const std::size_t n = 1 - p;
  return {.anchor = anchor, .pos = cands[p], .neg = cands[n], .alpha = dist[n] - dist[p]};
}

std::vector<Triplet> select_npair(const EmbeddingBatch& s, std::size_t anchor,
                                  SamplingStrategy strategy, std::size_t n_negatives, Rng& rng) {
  if (n_negatives == 0) throw SamplingError("n-pair sampling needs at least one negative");
  const auto cands = draw_candidates(s, anchor, strategy, n_negatives + 1, rng);
  std::vector<double> dist(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) dist[i] = cosine_distance(s[anchor], s[cands[i]]);
  const std::size_t p = closest(cands, dist);
  std::vector<Triplet> out;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (i == p) continue;
    out.push_back({.anchor = anchor, .pos = cands[p], .neg = cands[i], .alpha = dist[i] - dist[p]});
  }
  return out;
}

LossAndGrad loss_and_grad(const ProjectionModel& model, std::span<const Triplet> triplets,
                          const EmbeddingBatch& s, const LossSpec& spec) {
  const std::size_t d = model.d();
  const std::size_t m = model.m();
  LossAndGrad out{.loss = 0.0, .grad = Mat(d, m)};
  if (spec.kind == LossKind::kNone || triplets.empty()) return out;

  std::vector<double> losses;
  std::vector<Mat> grads;
  losses.reserve(triplets.size());
  grads.reserve(triplets.size());

  // One term: indices involved and the loss gradient w.r.t. each projection.
  struct Term {
    std::vector<std::size_t> idx;
    std::vector<Vec> g;
    std::size_t slot(std::size_t i, std::size_t m) {
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] == i) return k;
      }
      idx.push_back(i);
      g.emplace_back(m, 0.0);
      return idx.size() - 1;
    }
  };
  const auto flush = [&](Term& term, double loss) {
    Mat gm(d, m);
    for (std::size_t k = 0; k < term.idx.size(); ++k) add_outer(gm, s[term.idx[k]], term.g[k]);
    losses.push_back(loss);
    grads.push_back(std::move(gm));
  };

  switch (spec.kind) {
    case LossKind::kTripletsDynamic:
    case LossKind::kTripletsFixed: {
      for (const Triplet& t : triplets) {
        const Vec hi = project(model, s[t.anchor]);
        const Vec hp = project(model, s[t.pos]);
        const Vec hn = project(model, s[t.neg]);
        const double alpha = spec.kind == LossKind::kTripletsDynamic ? t.alpha : spec.fixed_alpha;
        const double margin = cosine_distance(hi, hp) - cosine_distance(hi, hn) + alpha;
        if (margin <= 0.0) continue;
        Term term;
        const std::size_t a = term.slot(t.anchor, m);
        const std::size_t p = term.slot(t.pos, m);
        add_cosine_distance_grad(hi, hp, 1.0, term.g[a], term.g[p]);
        const std::size_t a2 = term.slot(t.anchor, m);
        const std::size_t n = term.slot(t.neg, m);
        add_cosine_distance_grad(hi, hn, -1.0, term.g[a2], term.g[n]);
        flush(term, margin);
      }
      break;
    }
    case LossKind::kMse: {
      for (const Triplet& t : triplets) {
        const Vec hi = project(model, s[t.anchor]);
        Term term;
        double loss = 0.0;
        for (const std::size_t j : {t.pos, t.neg}) {
          const Vec hj = project(model, s[j]);
          const double diff = cosine_distance(hi, hj) - cosine_distance(s[t.anchor], s[j]);
          loss += diff * diff;
          const std::size_t a = term.slot(t.anchor, m);
          const std::size_t b = term.slot(j, m);
          add_cosine_distance_grad(hi, hj, 2.0 * diff, term.g[a], term.g[b]);
        }
        flush(term, loss);
      }
      break;
    }
    case LossKind::kNPairMc: {
      std::size_t i = 0;
      while (i < triplets.size()) {
        std::size_t j = i + 1;
        while (j < triplets.size() && triplets[j].anchor == triplets[i].anchor &&
               triplets[j].pos == triplets[i].pos) {
          ++j;
        }
        const Vec ha = project(model, s[triplets[i].anchor]);
        const Vec hp = project(model, s[triplets[i].pos]);
        const double ap = dot(ha, hp);
        std::vector<Vec> hn;
        std::vector<double> logits{0.0};
        for (std::size_t k = i; k < j; ++k) {
          hn.push_back(project(model, s[triplets[k].neg]));
          logits.push_back(dot(ha, hn.back()) - ap);
        }
        const double loss = log_sum_exp(logits);
        Term term;
        for (std::size_t k = 0; k < hn.size(); ++k) {
          const double w = std::exp(logits[k + 1] - loss);
          const std::size_t a = term.slot(triplets[i].anchor, m);
          axpy(w, hn[k], term.g[a]);
          axpy(-w, hp, term.g[a]);
          const std::size_t n = term.slot(triplets[i + k].neg, m);
          axpy(w, ha, term.g[n]);
          const std::size_t p = term.slot(triplets[i].pos, m);
          axpy(-w, ha, term.g[p]);
        }
        flush(term, loss);
        i = j;
      }
      break;
    }
    case LossKind::kNone:
      break;
  }

  if (!grads.empty()) {
    out.loss = pairwise_sum(losses);
    out.grad = pairwise_sum(std::span<const Mat>(grads));
  }
  return out;
}

ProjectionModel train_projection(ProjectionModel model, std::span<const std::vector<Vec>> sequences,
                                 const TrainConfig& config, Rng& rng) {
  if (config.loss.kind == LossKind::kNone || config.steps == 0) return model;
  if (sequences.empty()) throw SamplingError("no sequences to train on");
  if (config.batch_size == 0) throw ConfigError("batch size must be positive");

  Mat m1(model.d(), model.m());
  Mat m2(model.d(), model.m());
  double b1_pow = 1.0, b2_pow = 1.0;
  const std::size_t per_batch = std::max<std::size_t>(1, std::min(config.sequences_per_batch, sequences.size()));

  std::vector<std::size_t> order(sequences.size());
  for (std::size_t step = 0; step < config.steps; ++step) {
    // Partial Fisher-Yates for distinct sequences.
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    EmbeddingBatch batch;
    for (std::size_t i = 0; i < per_batch; ++i) {
      const std::size_t j = i + rng.uniform_index(order.size() - i);
      std::swap(order[i], order[j]);
      batch.add_sequence(sequences[order[i]]);
    }
    if (batch.size() == 0) throw SamplingError("selected sequences are empty");

    std::vector<Triplet> triplets;
    triplets.reserve(config.batch_size * (config.loss.kind == LossKind::kNPairMc ? config.loss.n_negatives : 1));
    for (std::size_t a = 0; a < config.batch_size; ++a) {
      for (int attempt = 0;; ++attempt) {
        const std::size_t anchor = rng.uniform_index(batch.size());
        try {
          if (config.loss.kind == LossKind::kNPairMc) {
            const auto group = select_npair(batch, anchor, config.sampling, config.loss.n_negatives, rng);
            triplets.insert(triplets.end(), group.begin(), group.end());
          } else {
            triplets.push_back(select_triplet(batch, anchor, config.sampling, rng));
          }
          break;
        } catch (const SamplingError&) {
          if (attempt >= 64) throw;
        }
      }
    }

    const LossAndGrad lg = loss_and_grad(model, triplets, batch, config.loss);
    const double mean_loss = lg.loss / static_cast<double>(config.batch_size);
    if (!std::isfinite(mean_loss)) {
      throw TrainingError("non-finite auxiliary loss at step " + std::to_string(step + 1));
    }

    const double scale = config.aux_weight / static_cast<double>(config.batch_size);
    b1_pow *= config.adam_beta1;
    b2_pow *= config.adam_beta2;
    auto w = model.weights.values();
    auto g = lg.grad.values();
    auto v1 = m1.values();
    auto v2 = m2.values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = scale * g[k];
      v1[k] = config.adam_beta1 * v1[k] + (1.0 - config.adam_beta1) * gk;
      v2[k] = config.adam_beta2 * v2[k] + (1.0 - config.adam_beta2) * gk * gk;
      const double mhat = v1[k] / (1.0 - b1_pow);
      const double vhat = v2[k] / (1.0 - b2_pow);
      w[k] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
    }
    model.log.push_back({.step = model.log.size() + 1, .loss = mean_loss});
  }
  return model;
}

std::vector<std::uint8_t> serialize_projection(const ProjectionModel& model) {
  ByteWriter w;
  w.put_magic("ENCP");
  w.put_u16(kProjectionVersion);
  w.put_u32(static_cast<std::uint32_t>(model.d()));
  w.put_u32(static_cast<std::uint32_t>(model.m()));
  for (double v : model.weights.values()) w.put_f64(v);
  const std::uint32_t crc = crc32(w.bytes());
  w.put_u32(crc);
  return w.take();
}

ProjectionModel deserialize_projection(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "projection");
  if (!r.expect_magic("ENCP")) throw CorruptStoreError("projection: bad magic");
  const std::uint16_t version = r.get_u16();
  if (version != kProjectionVersion) {
    throw VersionError("projection version " + std::to_string(version) + " unsupported");
  }
  const std::uint32_t d = r.get_u32();
  const std::uint32_t m = r.get_u32();
  if (d == 0 || m == 0 || m > d) throw CorruptStoreError("projection: bad shape");
  if (r.remaining() != static_cast<std::size_t>(d) * m * 8 + 4) {
    throw CorruptStoreError("projection: size does not match shape");
  }
  std::vector<double> values(static_cast<std::size_t>(d) * m);
  for (double& v : values) v = r.get_f64();
  const std::size_t body = r.position();
  if (r.get_u32() != crc32(bytes.subspan(0, body))) throw CorruptStoreError("projection: CRC mismatch");
  for (double v : values) {
    if (!std::isfinite(v)) throw CorruptStoreError("projection: non-finite weight");
  }
  return {.weights = Mat(d, m, std::move(values))};
}

void write_projection(const std::filesystem::path& path, const ProjectionModel& model) {
  write_file_atomic(path, serialize_projection(model));
}

ProjectionModel read_projection(const std::filesystem::path& path) {
  return deserialize_projection(read_file(path));
}

}  // namespace encode
