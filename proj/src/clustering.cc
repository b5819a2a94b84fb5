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

#include "encode/clustering.h"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "encode/errors.h"

namespace encode {

namespace {

void validate(std::span<const Vec> points, std::size_t k) {
  if (points.empty()) throw EmptyInputError("clustering needs at least one point");
  if (k == 0) throw ConfigError("cluster count must be at least 1");
  for (const Vec& p : points) {
    if (norm(p) == 0.0) throw ZeroNormError("cannot cluster a zero-norm point");
  }
}

std::size_t count_distinct(std::span<const Vec> points) {
  std::vector<const Vec*> ptrs;
  ptrs.reserve(points.size());
  for (const Vec& p : points) ptrs.push_back(&p);
  std::sort(ptrs.begin(), ptrs.end(), [](const Vec* a, const Vec* b) { return *a < *b; });
  return static_cast<std::size_t>(
      std::unique(ptrs.begin(), ptrs.end(), [](const Vec* a, const Vec* b) { return *a == *b; }) -
      ptrs.begin());
}

// Normalized mean of the unit directions of the members of each cluster.
// A cluster whose directions cancel keeps `fallback[c]`.
std::vector<Vec> direction_means(std::span<const Vec> points, std::span<const std::size_t> assign,
                                 std::size_t k, std::span<const Vec> fallback) {
  const std::size_t dim = points.front().size();
  std::vector<Vec> sums(k, Vec(dim, 0.0));
  for (std::size_t i = 0; i < points.size(); ++i) {
    axpy(1.0 / norm(points[i]), points[i], sums[assign[i]]);
  }
  std::vector<Vec> centers(k);
  for (std::size_t c = 0; c < k; ++c) {
    centers[c] = norm(sums[c]) > 0.0 ? normalized(sums[c]) : fallback[c];
  }
  return centers;
}

// Renumbers clusters so that every index in [0, K') is used, preserving
// the relative order of the surviving clusters.
void compact(Clustering& out, std::size_t k) {
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t a : out.assignments) ++counts[a];
  std::vector<std::size_t> remap(k);
  std::vector<Vec> centers;
  for (std::size_t c = 0; c < k; ++c) {
    remap[c] = centers.size();
    if (counts[c] > 0) centers.push_back(std::move(out.centers[c]));
  }
  for (std::size_t& a : out.assignments) a = remap[a];
  out.centers = std::move(centers);
}

}  // namespace

ClusteringMethod parse_clustering(std::string_view tag) {
  if (tag == "kmeans") return ClusteringMethod::kKMeans;
  if (tag == "random") return ClusteringMethod::kRandom;
  if (tag == "agglomerative") return ClusteringMethod::kAgglomerative;
  throw ConfigError("unknown clustering '" + std::string(tag) + "'");
}

std::string_view to_string(ClusteringMethod method) {
  switch (method) {
    case ClusteringMethod::kKMeans: return "kmeans";
    case ClusteringMethod::kRandom: return "random";
    case ClusteringMethod::kAgglomerative: return "agglomerative";
  }
  return "?";
}

double clustering_objective(std::span<const Vec> points, const Clustering& clustering) {
  std::vector<double> terms(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    terms[i] = cosine_distance(points[i], clustering.centers[clustering.assignments[i]]);
  }
  return pairwise_sum(terms);
}

Clustering kmeans(std::span<const Vec> points, std::size_t k, std::size_t max_iters, Rng& rng) {
  validate(points, k);
  if (max_iters == 0) throw ConfigError("k-means needs at least one iteration");
  const std::size_t n = points.size();
  k = std::min(k, count_distinct(points));

  // k-means++ seeding.
  std::vector<Vec> centers;
  std::vector<std::size_t> chosen;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  const auto add_center = [&](std::size_t idx) {
    chosen.push_back(idx);
    centers.push_back(normalized(points[idx]));
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], cosine_distance(points[i], centers.back()));
    }
  };
  add_center(rng.uniform_index(n));
  while (centers.size() < k) {
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) weights[i] = nearest[i] * nearest[i];
    const double total = pairwise_sum(weights);
    std::size_t pick = n;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (weights[i] <= 0.0) continue;
        pick = i;
        if (u < weights[i]) break;
        u -= weights[i];
      }
    } else {
      // Remaining distinct points are parallel to existing centers.
      for (std::size_t i = 0; i < n && pick == n; ++i) {
        const bool used = std::any_of(chosen.begin(), chosen.end(),
                                      [&](std::size_t c) { return points[c] == points[i]; });
        if (!used) pick = i;
      }
    }
    add_center(pick);
  }

  Clustering out;
  out.assignments.assign(n, 0);
  std::vector<double> dist(n, 0.0);
  std::vector<std::size_t> previous;
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = cosine_distance(points[i], centers[c]);
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      out.assignments[i] = best;
      dist[i] = best_d;
    }
    out.objective_trace.push_back(pairwise_sum(dist));
    if (iter > 0 && out.assignments == previous) break;
    previous = out.assignments;

    std::vector<std::size_t> counts(k, 0);
    for (std::size_t a : out.assignments) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[out.assignments[i]] < 2) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      if (far == n) break;
      --counts[out.assignments[far]];
      out.assignments[far] = c;
      ++counts[c];
      dist[far] = 0.0;
      centers[c] = normalized(points[far]);
    }
    centers = direction_means(points, out.assignments, k, centers);
  }
  out.centers = std::move(centers);
  compact(out, k);
  return out;
}

Clustering random_clustering(std::span<const Vec> points, std::size_t k, Rng& rng) {
  validate(points, k);
  Clustering out;
  out.assignments.resize(points.size());
  for (std::size_t& a : out.assignments) a = rng.uniform_index(k);
  std::vector<Vec> fallback(k);
  for (std::size_t i = points.size(); i-- > 0;) fallback[out.assignments[i]] = normalized(points[i]);
  for (Vec& f : fallback) {
    if (f.empty()) f = normalized(points.front());
  }
  out.centers = direction_means(points, out.assignments, k, fallback);
  compact(out, k);
  out.objective_trace.push_back(clustering_objective(points, out));
  return out;
}

Clustering agglomerative(std::span<const Vec> points, std::size_t k) {
  validate(points, k);
  const std::size_t n = points.size();
  k = std::min(k, n);

  // Condensed pairwise distances between active clusters, updated in place
  // with the average-linkage Lance-Williams rule.
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dist[i * n + j] = dist[j * n + i] = cosine_distance(points[i], points[j]);
    }
  }
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);

  struct Merge {
    double height;
    std::size_t a, b;
  };
  std::vector<Merge> merges;
  std::vector<std::size_t> chain;
  std::size_t remaining = n;
  while (remaining > 1) {
    if (chain.empty()) {
      std::size_t first = 0;
      while (!active[first]) ++first;
      chain.push_back(first);
    }
    const std::size_t a = chain.back();
    const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
    std::size_t b = n;
    double best = std::numeric_limits<double>::infinity();
    if (prev != n) {
      b = prev;
      best = dist[a * n + prev];
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!active[j] || j == a) continue;
      if (dist[a * n + j] < best) {
        best = dist[a * n + j];
        b = j;
      }
    }
    if (b == prev) {
      chain.pop_back();
      chain.pop_back();
      const std::size_t keep = std::min(a, b), drop = std::max(a, b);
      merges.push_back({best, keep, drop});
      for (std::size_t j = 0; j < n; ++j) {
        if (!active[j] || j == keep || j == drop) continue;
        const double merged = (static_cast<double>(size[keep]) * dist[keep * n + j] +
                               static_cast<double>(size[drop]) * dist[drop * n + j]) /
                              static_cast<double>(size[keep] + size[drop]);
        dist[keep * n + j] = dist[j * n + keep] = merged;
      }
      size[keep] += size[drop];
      active[drop] = false;
      --remaining;
    } else {
      chain.push_back(b);
    }
  }

  // Cut the dendrogram: replay the n - k lowest merges.
  std::stable_sort(merges.begin(), merges.end(),
                   [](const Merge& x, const Merge& y) { return x.height < y.height; });
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n - k; ++i) {
    const std::size_t ra = find(merges[i].a), rb = find(merges[i].b);
    parent[std::max(ra, rb)] = std::min(ra, rb);
  }

  Clustering out;
  out.assignments.resize(n);
  std::vector<std::size_t> label(n, n);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (label[r] == n) label[r] = next++;
    out.assignments[i] = label[r];
  }
  std::vector<Vec> fallback(next);
  for (std::size_t i = n; i-- > 0;) fallback[out.assignments[i]] = normalized(points[i]);
  out.centers = direction_means(points, out.assignments, next, fallback);
  out.objective_trace.push_back(clustering_objective(points, out));
  return out;
}

Clustering run_clustering(ClusteringMethod method, std::span<const Vec> points, std::size_t k,
                          std::size_t max_iters, Rng& rng) {
  switch (method) {
    case ClusteringMethod::kKMeans: return kmeans(points, k, max_iters, rng);
    case ClusteringMethod::kRandom: return random_clustering(points, k, rng);
    case ClusteringMethod::kAgglomerative: return agglomerative(points, k);
  }
  throw ConfigError("unknown clustering method");
}

}  // namespace encode
