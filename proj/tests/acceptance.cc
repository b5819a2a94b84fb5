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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances and sizes are the contract's; nothing here is
// tuned to make a criterion pass.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "encode/baselines.h"
#include "encode/cli.h"
#include "encode/clustering.h"
#include "encode/datagen.h"
#include "encode/evalmetrics.h"
#include "encode/experiment.h"
#include "encode/inference.h"
#include "encode/interest.h"
#include "encode/projection.h"
#include "encode/serving.h"
#include "encode/store.h"
#include "json.hpp"
#include "test_util.h"

namespace encode::acceptance {
namespace {

using testing::random_unit;
using testing::random_units;
using testing::random_vec;
using testing::ScratchDir;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double cos_dis(const Vec& a, const Vec& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return 1.0 - ab / std::sqrt(aa * bb);
}

// Planted data at the reference shape (d = 32, G = 3, L = 1000). The
// catalog is smaller than the generator default to keep the brute-force
// behavior draws inside the runtime budgets.
DatasetParams planted(std::uint64_t seed, std::size_t users) {
  DatasetParams p;
  p.n_users = users;
  p.length = 1000;
  p.n_items = 5000;
  p.dim = 32;
  p.num_interests = 3;
  p.seed = seed;
  return p;
}

// Projection trained with the reference defaults (m = 4, 2000 steps,
// lr 1e-4, batch 1024, aux weight 0.1), seeded like the CLI.
ProjectionModel trained_projection(std::span<const std::vector<Vec>> sequences, std::uint64_t seed,
                                   ProjectionModel* untrained = nullptr) {
  Rng init_rng = Rng(seed).split(0);
  ProjectionModel init = init_projection(32, 4, init_rng);
  if (untrained != nullptr) *untrained = init;
  Rng train_rng = Rng(seed).split(1);
  return train_projection(std::move(init), sequences, TrainConfig{}, train_rng);
}

std::vector<std::vector<Vec>> embeddings_of(const Dataset& ds, std::size_t begin, std::size_t end) {
  std::vector<std::vector<Vec>> out;
  for (std::size_t u = begin; u < end; ++u) out.push_back(sequence_embeddings(ds.sequences[u], ds.catalog));
  return out;
}

// 1. ENCODE with K = L equals unified-metric target attention.
Outcome k_equals_l() {
  Rng rng(101);
  const ItemCatalog catalog = generate_catalog(5000, 32, 8, rng);
  double worst = 0.0;
  std::size_t users_checked = 0;
  for (int user = 0; user < 50; ++user) {
    std::vector<std::size_t> idx(catalog.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < 200; ++i) std::swap(idx[i], idx[i + rng.uniform_index(idx.size() - i)]);
    std::vector<Vec> s;
    for (std::size_t i = 0; i < 200; ++i) s.push_back(catalog.items()[idx[i]].embedding);
    const ProjectionModel proj = init_projection(32, 4, rng);
    const ExtractionConfig cfg{.k = 200, .seed = static_cast<std::uint64_t>(user)};
    const InterestSet set = extract_interests(user, s, 0, proj, cfg, rng);
    if (set.interests.size() != 200) return {false, fmt("user %d: K'=%zu, expected 200", user, set.interests.size())};
    const Vec& x = catalog.items()[rng.uniform_index(catalog.size())].embedding;
    const InterestQuery q = infer_interest(set, x, cfg.beta, AttentionMetric::kUnifiedSim);
    const StrategyWeights ta = din_l_weights(s, x, AttentionMetric::kUnifiedSim, cfg.beta);
    for (std::size_t i = 0; i < s.size(); ++i) worst = std::max(worst, std::abs(q.trace.final_weights[i] - ta.weights[i]));
    ++users_checked;
  }
  return {worst <= 1e-9, fmt("max |w_encode - w_ta| = %.3g over %zu users (tol 1e-9)", worst, users_checked)};
}

// Oracle losses, written directly from the loss definitions.
double oracle_loss(const Mat& w, const std::vector<Vec>& s, const std::vector<Triplet>& ts, const LossSpec& spec) {
  const auto h = [&](std::size_t i) {
    Vec out(w.cols(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      for (std::size_t c = 0; c < w.cols(); ++c) out[c] += w(r, c) * s[i][r];
    }
    return out;
  };
  const auto raw = [](const Vec& a, const Vec& b) {
    double v = 0;
    for (std::size_t k = 0; k < a.size(); ++k) v += a[k] * b[k];
    return v;
  };
  double total = 0.0;
  if (spec.kind == LossKind::kNPairMc) {
    for (std::size_t i = 0; i < ts.size();) {
      const Vec ha = h(ts[i].anchor), hp = h(ts[i].pos);
      double inner = 1.0;
      std::size_t j = i;
      for (; j < ts.size() && ts[j].anchor == ts[i].anchor && ts[j].pos == ts[i].pos; ++j) {
        inner += std::exp(raw(ha, h(ts[j].neg)) - raw(ha, hp));
      }
      total += std::log(inner);
      i = j;
    }
    return total;
  }
  for (const Triplet& t : ts) {
    const Vec ha = h(t.anchor), hp = h(t.pos), hn = h(t.neg);
    if (spec.kind == LossKind::kMse) {
      const double a = cos_dis(ha, hp) - cos_dis(s[t.anchor], s[t.pos]);
      const double b = cos_dis(ha, hn) - cos_dis(s[t.anchor], s[t.neg]);
      total += a * a + b * b;
    } else {
      const double alpha = spec.kind == LossKind::kTripletsDynamic ? t.alpha : spec.fixed_alpha;
      total += std::max(0.0, cos_dis(ha, hp) - cos_dis(ha, hn) + alpha);
    }
  }
  return total;
}

// 2. Analytic gradients against central finite differences.
Outcome gradient_oracle() {
  const std::vector<std::pair<const char*, LossSpec>> specs = {{"triplets_dynamic", LossSpec::triplets_dynamic()},
                                                               {"triplets_fixed", LossSpec::triplets_fixed(0.2)},
                                                               {"mse", LossSpec::mse()},
                                                               {"n_pair_mc", LossSpec::n_pair_mc(5)}};
  std::string detail;
  bool pass = true;
  for (const auto& [name, spec] : specs) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(1000 + seed);
      const std::vector<Vec> s = random_units(12, 6, rng);
      ProjectionModel model = init_projection(6, 2, rng);
      EmbeddingBatch batch(s);
      std::vector<Triplet> ts;
      for (std::size_t a = 0; a < 8; ++a) {
        if (spec.kind == LossKind::kNPairMc) {
          const auto g = select_npair(batch, a, SamplingStrategy::kWithinSequence, spec.n_negatives, rng);
          ts.insert(ts.end(), g.begin(), g.end());
        } else {
          ts.push_back(select_triplet(batch, a, SamplingStrategy::kWithinSequence, rng));
        }
      }
      const LossAndGrad lg = loss_and_grad(model, ts, batch, spec);
      const double step = 1e-5;
      double num = 0.0, scale = 0.0;
      for (std::size_t k = 0; k < model.weights.values().size(); ++k) {
        Mat plus = model.weights, minus = model.weights;
        plus.values()[k] += step;
        minus.values()[k] -= step;
        const double fd = (oracle_loss(plus, s, ts, spec) - oracle_loss(minus, s, ts, spec)) / (2 * step);
        num = std::max(num, std::abs(lg.grad.values()[k] - fd));
        scale = std::max(scale, std::abs(fd));
      }
      // Relative to the largest gradient entry; a zero gradient must match exactly-ish.
      worst = std::max(worst, scale > 0 ? num / scale : num);
    }
    pass = pass && worst <= 1e-4;
    detail += fmt("%s %.2g; ", name, worst);
  }
  detail += "(max relative error over 20 instances each, tol 1e-4)";
  return {pass, detail};
}

// 3. Trained projection preserves distance order better than the random init.
Outcome distance_preservation() {
  double total = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset ds = generate_dataset(planted(seed, 60)).dataset;
    const auto train = embeddings_of(ds, 0, 40);
    const auto held_out = embeddings_of(ds, 40, 60);
    ProjectionModel untrained;
    const ProjectionModel trained = trained_projection(train, seed, &untrained);
    Rng r1(seed + 500), r2(seed + 500);
    const double before = triplet_agreement(untrained, held_out, 20000, r1);
    const double after = triplet_agreement(trained, held_out, 20000, r2);
    total += after - before;
    per_seed += fmt("%.3f->%.3f ", before, after);
  }
  const double mean = total / 5.0;
  return {mean >= 0.05, fmt("mean gain %.4f (need >= 0.05); per seed %s", mean, per_seed.c_str())};
}

// Objective of a 2-partition under its best centers.
double partition_cost(const std::vector<Vec>& pts, std::size_t mask) {
  double cost = 0.0;
  for (int side = 0; side < 2; ++side) {
    Vec sum(pts[0].size(), 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (((mask >> i) & 1u) != static_cast<std::size_t>(side)) continue;
      const double len = std::sqrt(std::inner_product(pts[i].begin(), pts[i].end(), pts[i].begin(), 0.0));
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += pts[i][k] / len;
      ++n;
    }
    cost += static_cast<double>(n) - std::sqrt(std::inner_product(sum.begin(), sum.end(), sum.begin(), 0.0));
  }
  return cost;
}

// 4. k-means objective trace and planted antipodal recovery.
Outcome kmeans_correctness() {
  Rng rng(404);
  std::size_t violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 20 + rng.uniform_index(400);
    const std::size_t d = 2 + rng.uniform_index(15);
    const auto pts = random_units(n, d, rng);
    const Clustering c = kmeans(pts, 1 + rng.uniform_index(40), 15, rng);
    for (std::size_t i = 1; i < c.objective_trace.size(); ++i) {
      violations += c.objective_trace[i] > c.objective_trace[i - 1];
    }
  }
  std::size_t recovered = 0;
  const int planted_trials = 50;
  for (int trial = 0; trial < planted_trials; ++trial) {
    const std::size_t n = 4 + rng.uniform_index(9);  // 4..12 points
    const std::size_t d = 2 + rng.uniform_index(6);
    const Vec c = random_unit(d, rng);
    std::vector<Vec> pts;
    std::size_t planted_mask = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool side = i % 2 == 1;
      Vec p = c;
      for (double& x : p) x = (side ? -x : x) + 0.1 * rng.normal();
      pts.push_back(p);
      if (side) planted_mask |= std::size_t{1} << i;
    }
    std::size_t best_mask = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
      const double cost = partition_cost(pts, mask);
      if (cost < best) {
        best = cost;
        best_mask = mask;
      }
    }
    const Clustering got = kmeans(pts, 2, 15, rng);
    std::size_t got_mask = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (got.assignments[i] != got.assignments[0]) got_mask |= std::size_t{1} << i;
    }
    const std::size_t all = (std::size_t{1} << n) - 1;
    const auto same = [&](std::size_t a, std::size_t b) { return a == b || a == (all ^ b); };
    recovered += same(got_mask, best_mask) && same(got_mask, planted_mask);
  }
  return {violations == 0 && recovered == planted_trials,
          fmt("%zu objective increases over 100 runs; %zu/%d planted antipodal sets recovered and equal to the "
              "exhaustive optimum",
              violations, recovered, planted_trials)};
}

// 5. Every strategy yields a distribution over the behaviors.
Outcome weight_normalization() {
  DatasetParams p = planted(55, 20);
  p.length = 300;
  p.n_items = 2000;
  const Dataset ds = generate_dataset(p).dataset;
  Rng rng(5);
  const StrategyEnv env = make_env(init_projection(32, 4, rng), ExtractionConfig{}, kDefaultHashBits, 9);
  const auto kinds = all_strategies();
  std::vector<UserArtifacts> users;
  for (const BehaviorSequence& seq : ds.sequences) users.push_back(prepare_user(env, seq, ds.catalog, kinds));
  double worst_sum = 0.0, most_negative = 0.0;
  for (int pair = 0; pair < 500; ++pair) {
    const UserArtifacts& user = users[rng.uniform_index(users.size())];
    const Item& target = ds.catalog.items()[rng.uniform_index(ds.catalog.size())];
    for (StrategyKind kind : kinds) {
      const StrategyWeights w = strategy_weights(kind, env, user, target);
      double total = 0.0;
      for (double v : w.weights) {
        total += v;
        most_negative = std::min(most_negative, v);
      }
      worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    }
  }
  return {worst_sum <= 1e-9 && most_negative >= 0.0,
          fmt("%zu strategies x 500 pairs: max |sum - 1| = %.3g, min weight = %.3g", kinds.size(), worst_sum,
              most_negative)};
}

// 6. Relevance indicator ordering.
Outcome ri_ordering() {
  const std::vector<StrategyKind> kinds = {StrategyKind::kEncode, StrategyKind::kAvgPooling, StrategyKind::kSdim};
  std::map<std::string, double> weighted;
  std::size_t pairs = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    DatasetParams p = planted(seed, 50);
    p.samples_pos = 4;
    p.samples_neg = 4;
    const Dataset ds = generate_dataset(p).dataset;
    const auto seqs = embeddings_of(ds, 0, ds.sequences.size());
    const StrategyEnv env =
        make_env(trained_projection(seqs, seed), ExtractionConfig{.seed = seed}, kDefaultHashBits, Rng(seed).split(7).seed());
    const auto records = evaluate_ri(ds, env, kinds, seed);
    per_seed += fmt("seed %llu:", static_cast<unsigned long long>(seed));
    for (const RiRecord& r : records) {
      weighted[r.strategy] += r.ri * static_cast<double>(r.pairs);
      per_seed += fmt(" %s=%.4f", r.strategy.c_str(), r.ri);
    }
    per_seed += "; ";
    pairs += records.front().pairs;
  }
  for (auto& [name, v] : weighted) v /= static_cast<double>(pairs);
  const double enc = weighted["encode"], avg = weighted["avg_pooling"], sdim = weighted["sdim"];
  return {pairs >= 200 && enc < avg && enc < sdim,
          fmt("mean RI over %zu pairs: encode %.4f, avg_pooling %.4f, sdim %.4f (need encode below both); ", pairs,
              enc, avg, sdim) +
              per_seed};
}

// 7. AUC ordering with a shared head protocol.
Outcome auc_ordering() {
  const std::vector<StrategyKind> kinds = {StrategyKind::kDinL, StrategyKind::kEncode, StrategyKind::kAvgPooling,
                                           StrategyKind::kDinShort};
  std::map<std::string, double> mean;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    DatasetParams p = planted(seed, 200);
    p.samples_pos = 100;
    p.samples_neg = 100;
    const Dataset ds = generate_dataset(p).dataset;
    std::vector<std::vector<Vec>> seqs = embeddings_of(ds, 0, ds.sequences.size());
    const StrategyEnv env =
        make_env(trained_projection(seqs, seed), ExtractionConfig{.seed = seed}, kDefaultHashBits, Rng(seed).split(7).seed());
    const HeadProtocol protocol{.train = HeadTrainConfig{}, .shuffle_seed = Rng(seed).split(2).seed()};
    const auto records = evaluate_auc(ds, env, kinds, protocol, seed);
    per_seed += fmt("seed %llu:", static_cast<unsigned long long>(seed));
    for (const AucRecord& r : records) {
      mean[r.strategy] += r.auc / 3.0;
      per_seed += fmt(" %s=%.4f", r.strategy.c_str(), r.auc);
    }
    per_seed += "; ";
  }
  const double din = mean["din_l"], enc = mean["encode"], avg = mean["avg_pooling"], shrt = mean["din_short"];
  const bool pass = din >= enc && enc >= avg && avg >= shrt && din - enc <= 0.01;
  return {pass, fmt("mean test AUC din_l %.4f >= encode %.4f >= avg_pooling %.4f >= din_short %.4f, gap %.4f "
                    "(<= 0.01); ",
                    din, enc, avg, shrt, din - enc) +
                    per_seed};
}

// 8. Online cost of ENCODE is independent of L.
Outcome complexity() {
  Rng rng(8);
  const StrategyEnv env = make_env(init_projection(32, 4, rng), ExtractionConfig{}, kDefaultHashBits, 8);
  const std::vector<StrategyKind> kinds = {StrategyKind::kEncode, StrategyKind::kDinL};
  const auto records = run_bench(env, kinds, BenchConfig{.seed = 8});
  std::map<std::string, std::map<std::size_t, BenchRecord>> by;
  for (const BenchRecord& r : records) by[r.strategy][r.length] = r;
  bool counts_ok = true;
  std::string detail;
  for (const auto& [length, r] : by["encode"]) {
    counts_ok = counts_ok && r.k > 0 && r.metric_evals == static_cast<double>(r.k);
    detail += fmt("L=%zu K'=%zu evals=%.0f p50 %.1fus; ", length, r.k, r.metric_evals, r.micros.p50);
  }
  for (const auto& [length, r] : by["din_l"]) detail += fmt("din_l L=%zu p50 %.1fus; ", length, r.micros.p50);
  const double enc_growth = by["encode"][16000].micros.p50 / by["encode"][1000].micros.p50;
  const double din_growth = by["din_l"][16000].micros.p50 / by["din_l"][1000].micros.p50;
  detail += fmt("growth encode %.2fx (< 2), din_l %.2fx (>= 8)", enc_growth, din_growth);
  return {counts_ok && enc_growth < 2.0 && din_growth >= 8.0, detail};
}

// 9. SimHash collision probability 1 - theta / pi.
Outcome simhash_lsh() {
  Rng rng(9);
  const std::size_t d = 32, rows = 10000;
  const Mat w = make_hash_matrix(d, rows, rng);
  bool pass = true;
  std::string detail;
  for (double deg : {30.0, 60.0, 90.0}) {
    const double theta = deg * std::numbers::pi / 180.0;
    const Vec a = random_unit(d, rng);
    Vec u = random_vec(d, rng);
    const double proj = std::inner_product(u.begin(), u.end(), a.begin(), 0.0);
    for (std::size_t k = 0; k < d; ++k) u[k] -= proj * a[k];
    const double un = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
    Vec b(d);
    for (std::size_t k = 0; k < d; ++k) b[k] = std::cos(theta) * a[k] + std::sin(theta) * u[k] / un;
    const HashCodes ca = simhash(a, w), cb = simhash(b, w);
    const double collide = 1.0 - static_cast<double>(hamming_distance(ca.code(0), cb.code(0))) / rows;
    const double expect = 1.0 - theta / std::numbers::pi;
    pass = pass && std::abs(collide - expect) <= 0.05;
    detail += fmt("%.0f deg: %.4f vs %.4f; ", deg, collide, expect);
  }
  return {pass, detail + "(tol 0.05)"};
}

// 10. Retrieval strategies collapse to full attention when k >= L.
Outcome k_at_least_l() {
  Rng rng(10);
  std::size_t mismatches = 0, checks = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t length = 1 + rng.uniform_index(300);
    const auto s = random_units(length, 32, rng);
    const std::vector<std::uint32_t> cats(length, 3);
    const Vec x = random_unit(32, rng);
    const Mat w = make_hash_matrix(32, 64, rng);
    const auto full = din_l_weights(s, x, AttentionMetric::kScaledDot).weights;
    for (std::size_t k : {length, length + 1, 10 * length}) {
      mismatches += eta_weights(s, x, w, k).weights != full;
      mismatches += twin_weights(s, x, k).weights != full;
      mismatches += sim_hard_weights(s, cats, x, 3, k).weights != full;
      checks += 3;
    }
  }
  return {mismatches == 0, fmt("%zu of %zu ETA/TWIN/SIM-hard weight vectors differ bitwise from DIN-L", mismatches, checks)};
}

class LineClient {
 public:
  explicit LineClient(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    ok_ = ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0;
  }
  ~LineClient() { ::close(fd_); }
  bool ok() const { return ok_; }
  std::string call(const std::string& line) {
    const std::string msg = line + "\n";
    if (::send(fd_, msg.data(), msg.size(), MSG_NOSIGNAL) != static_cast<ssize_t>(msg.size())) return {};
    for (;;) {
      const auto nl = pending_.find('\n');
      if (nl != std::string::npos) {
        std::string out = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        return out;
      }
      char buf[4096];
      const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
      if (n <= 0) return {};
      pending_.append(buf, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_ = -1;
  bool ok_ = false;
  std::string pending_;
};

// 11. Store round trip and serving across a snapshot swap.
Outcome persistence_and_serving() {
  ScratchDir dir("acceptance-store");
  Rng rng(11);
  DatasetParams p = planted(11, 30);
  p.length = 200;
  p.n_items = 1000;
  const Dataset ds = generate_dataset(p).dataset;
  const ProjectionModel proj = init_projection(32, 4, rng);
  const BatchExtraction v1 = batch_extract(ds.sequences, ds.catalog, proj, ExtractionConfig{.seed = 1});
  const BatchExtraction v2 = batch_extract(ds.sequences, ds.catalog, proj, ExtractionConfig{.k = 10, .seed = 2});
  write_store(dir / "store.bin", v1.sets, v1.config_hash);

  // Round trip: every value equals its f32 rounding.
  const auto snap = Snapshot::open(dir / "store.bin");
  std::size_t bad_values = 0;
  for (const InterestSet& want : v1.sets) {
    const InterestSet got = snap->lookup(want.user_id);
    bad_values += got.created_at != want.created_at || got.interests.size() != want.interests.size();
    for (std::size_t k = 0; k < std::min(got.interests.size(), want.interests.size()); ++k) {
      for (std::size_t t = 0; t < 32; ++t) {
        bad_values += got.interests[k][t] != static_cast<double>(static_cast<float>(want.interests[k][t]));
      }
    }
  }

  ServingModel model{.catalog = ds.catalog, .head = zero_head(32)};
  model.head.weights = random_vec(model.head.num_features(), rng);
  // Expected replies under each store version, computed from the sets the
  // snapshots will hold.
  const std::uint64_t user = ds.sequences[7].user_id;
  const std::vector<std::uint64_t> items = {ds.catalog.items()[1].id, ds.catalog.items()[500].id};
  const auto expected = [&](const Snapshot& s) {
    const InterestSet set = s.lookup(user);
    std::vector<double> out;
    for (std::uint64_t id : items) {
      const Item& it = ds.catalog.at(id);
      out.push_back(score(model.head, online_interest(set.interests, it.embedding, model.beta).interest, it.embedding));
    }
    return out;
  };
  const auto want_a = expected(*snap);
  const auto want_b = expected(*Snapshot::from_bytes(serialize_store(v2.sets, v2.config_hash)));

  Server server(model, snap, dir / "store.bin");
  TcpServer tcp(server, 0);
  std::jthread acceptor([&] { tcp.run(); });
  const std::string request =
      "{\"user\": " + std::to_string(user) + ", \"items\": [" + std::to_string(items[0]) + ", " + std::to_string(items[1]) + "]}";
  std::atomic<int> malformed{0}, torn{0}, done{0}, saw_a{0}, saw_b{0};
  std::vector<std::jthread> clients;
  for (int c = 0; c < 4; ++c) {
    clients.emplace_back([&] {
      LineClient client(tcp.port());
      for (int i = 0; i < 2500; ++i) {
        const std::string reply = client.ok() ? client.call(request) : std::string();
        const auto j = nlohmann::json::parse(reply, nullptr, false);
        if (j.is_discarded() || !j.contains("scores") || j["scores"].size() != 2 || j["user"] != user) {
          ++malformed;
        } else {
          const std::vector<double> got = {j["scores"][0].get<double>(), j["scores"][1].get<double>()};
          if (got == want_a) {
            ++saw_a;
          } else if (got == want_b) {
            ++saw_b;
          } else {
            ++torn;
          }
        }
        ++done;
      }
    });
  }
  while (done < 5000) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  write_store(dir / "store.bin", v2.sets, v2.config_hash);
  const std::uint64_t generation = server.reload();
  clients.clear();
  tcp.stop();
  acceptor.join();
  const bool pass = bad_values == 0 && malformed == 0 && torn == 0 && done == 10000 && generation == 2 && saw_b > 0;
  return {pass, fmt("round-trip mismatches %zu; %d requests, %d malformed, %d torn, %d before / %d after the swap",
                    bad_values, done.load(), malformed.load(), torn.load(), saw_a.load(), saw_b.load())};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Bench CSV without the three latency columns.
std::string strip_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string out;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> fields;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i >= 3 && i <= 5) continue;
      out += fields[i] + ",";
    }
    out += "\n";
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, const std::string& input, std::string* out_text) {
  std::vector<const char*> argv = {"encode"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), in, out, err);
  if (out_text != nullptr) *out_text = out.str();
  if (code != 0) std::fprintf(stderr, "  cli error: %s", err.str().c_str());
  return code;
}

// 12. Every command is reproducible from its flags and seed.
Outcome determinism() {
  ScratchDir a("acceptance-a"), b("acceptance-b");
  std::vector<std::string> failures;
  std::size_t compared = 0;
  for (const ScratchDir* dir : {&a, &b}) {
    const auto path = [&](const char* f) { return (*dir / f).string(); };
    {
      std::ofstream log(*dir / "log.csv");
      log << "user_id,item_id,timestamp,category\n1,10,5,0\n1,11,6,1\n2,10,7,0\n2,12,9,2\n";
    }
    const std::string seed = "42";
    std::string score_out, serve_out;
    const std::vector<std::vector<std::string>> commands = {
        {"--seed", seed, "gen-data", "--users", "12", "--L", "150", "--items", "800", "--samples-pos", "6",
         "--samples-neg", "6", "--out", path("d.jsonl")},
        {"--seed", seed, "gen-data", "--from-log", path("log.csv"), "--d", "8", "--out", path("log.jsonl")},
        {"--seed", seed, "train-proj", "--data", path("d.jsonl"), "--steps", "30", "--batch", "64", "--out",
         path("p.bin"), "--log-out", path("p_log.csv")},
        {"--seed", seed, "extract", "--data", path("d.jsonl"), "--proj", path("p.bin"), "--K", "8", "--parallel",
         dir == &a ? "1" : "3", "--out", path("s.bin")},
        {"--seed", seed, "train-head", "--data", path("d.jsonl"), "--proj", path("p.bin"), "--K", "8", "--head-batch",
         "32", "--out", path("h.bin")},
        {"--seed", seed, "bench", "--L", "200,400", "--repetitions", "3", "--warmup", "1", "--batch", "4", "--items",
         "500", "--strategies", "encode,din_l,eta,sdim", "--out", path("b.csv")},
        {"--seed", seed, "evaluate", "--data", path("d.jsonl"), "--proj", path("p.bin"), "--K", "8", "--head-batch",
         "32", "--out-dir", dir->path().string()},
        {"--seed", seed, "ablate", "--data", path("d.jsonl"), "--sweep", "loss", "--steps", "10", "--batch", "32",
         "--head-batch", "32", "--out", path("abl.csv")},
    };
    for (const auto& cmd : commands) {
      if (run_cli(cmd, "", nullptr) != 0) failures.push_back("exit code of " + cmd[2]);
    }
    const Dataset ds = read_dataset(*dir / "d.jsonl");
    const std::string req = "{\"user\": " + std::to_string(ds.sequences[2].user_id) + ", \"items\": [" +
                            std::to_string(ds.catalog.items()[9].id) + "]}\n";
    {
      std::ofstream(*dir / "req.jsonl") << req;
    }
    if (run_cli({"--seed", seed, "score", "--store", path("s.bin"), "--data", path("d.jsonl"), "--head",
                 path("h.bin"), "--requests", path("req.jsonl"), "--out", path("scores.jsonl")},
                "", nullptr) != 0) {
      failures.push_back("exit code of score");
    }
    if (run_cli({"--seed", seed, "serve", "--store", path("s.bin"), "--data", path("d.jsonl"), "--head", path("h.bin")},
                req + req, &serve_out) != 0) {
      failures.push_back("exit code of serve");
    }
    std::ofstream(*dir / "serve.out") << serve_out;
  }
  for (const char* f : {"d.jsonl", "log.jsonl", "p.bin", "p_log.csv", "s.bin", "h.bin", "ri_report.csv",
                        "auc_report.csv", "abl.csv", "scores.jsonl", "serve.out"}) {
    ++compared;
    const std::string x = slurp(a / f), y = slurp(b / f);
    if (x.empty() || x != y) failures.push_back(f);
  }
  ++compared;
  if (strip_timing(slurp(a / "b.csv")) != strip_timing(slurp(b / "b.csv"))) failures.push_back("b.csv");
  std::string detail = fmt("%zu artifacts from 10 commands compared", compared);
  if (!failures.empty()) {
    detail += "; differing or failed:";
    for (const auto& f : failures) detail += " " + f;
  }
  return {failures.empty(), detail};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0 = no stated runtime bound
  std::function<Outcome()> check;
};

}  // namespace
}  // namespace encode::acceptance

int main() {
  using namespace encode::acceptance;
  const std::vector<Criterion> criteria = {
      {1, "K=L equivalence", 10, k_equals_l},
      {2, "gradient oracle", 30, gradient_oracle},
      {3, "distance preservation", 120, distance_preservation},
      {4, "k-means correctness", 30, kmeans_correctness},
      {5, "weight normalization", 0, weight_normalization},
      {6, "RI ordering", 300, ri_ordering},
      {7, "AUC ordering", 600, auc_ordering},
      {8, "online complexity", 0, complexity},
      {9, "SimHash LSH property", 0, simhash_lsh},
      {10, "k>=L collapse", 0, k_at_least_l},
      {11, "persistence and serving", 0, persistence_and_serving},
      {12, "determinism", 0, determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = o.pass;
    std::string timing = fmt("%.1fs", secs);
    if (c.budget_seconds > 0) {
      timing += fmt(" of %.0fs", c.budget_seconds);
      if (secs >= c.budget_seconds) {
        pass = false;
        timing += " OVER BUDGET";
      }
    }
    failed += !pass;
    std::printf("[%s] %2d %s: %s [%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
