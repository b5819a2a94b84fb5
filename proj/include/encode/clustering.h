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

// Partitioning of projected behaviors under the cosine distance.

#ifndef ENCODE_CLUSTERING_H_
#define ENCODE_CLUSTERING_H_

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "encode/numerics.h"

namespace encode {

struct Clustering {
  std::vector<std::size_t> assignments;  // one per point, in [0, num_clusters())
  std::vector<Vec> centers;              // unit norm
  // Total within-cluster cosine distance after every assignment step.
  std::vector<double> objective_trace;

  std::size_t num_clusters() const { return centers.size(); }
};

enum class ClusteringMethod { kKMeans, kRandom, kAgglomerative };

ClusteringMethod parse_clustering(std::string_view tag);
std::string_view to_string(ClusteringMethod method);

// Spherical k-means. Seeding is k-means++ on squared cosine distance;
// assignment is argmin cosine distance (ties to the lower cluster); a center
// is the normalized mean of its members' unit directions, which is the
// minimizer of the cluster's total cosine distance, so the objective never
// increases. Runs at most `max_iters` assignment passes and stops early when
// nothing moves. An emptied cluster is reseeded with the point farthest from
// its center (taken from a cluster with other members). With fewer distinct
// points than k, only that many clusters are formed.
// Throws ZeroNormError on a zero point, EmptyInputError on no points,
// ConfigError when k or max_iters is zero.
Clustering kmeans(std::span<const Vec> points, std::size_t k, std::size_t max_iters, Rng& rng);

// Uniform random assignment; empty clusters are dropped.
Clustering random_clustering(std::span<const Vec> points, std::size_t k, Rng& rng);

// Average-linkage agglomerative clustering cut at k clusters. The full
// dendrogram is built with the nearest-neighbor-chain algorithm (O(n^2)
// time and memory).
Clustering agglomerative(std::span<const Vec> points, std::size_t k);

Clustering run_clustering(ClusteringMethod method, std::span<const Vec> points, std::size_t k,
                          std::size_t max_iters, Rng& rng);

// sum_i cosine_distance(points[i], centers[assignments[i]])
double clustering_objective(std::span<const Vec> points, const Clustering& clustering);

}  // namespace encode

#endif  // ENCODE_CLUSTERING_H_
