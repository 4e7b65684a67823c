// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace pfp::metrics {

// Shannon entropy in nats of an action-count distribution. Zero-count
// actions contribute nothing; an all-zero table is an error.
double action_entropy(std::span<const uint64_t> counts);

// |visited| / |all|. `visited` must be a subset of `all`.
double coverage(const std::set<std::string>& visited, const std::set<std::string>& all);

// alpha * H/ln|A| + (1-alpha) * mean coverage. The entropy term is
// normalized so both terms live in [0, 1]; requires |A| >= 2.
double d_act(double entropy_nats, size_t action_count, double mean_coverage, double alpha);

// Mean squared Euclidean distance to the centroid. `dim` is the embedding
// width; `flat` holds n*dim values row-major.
double d_pkt(std::span<const double> flat, size_t dim);

struct PersonaDiversity {
  std::string persona;
  double entropy_nats = 0.0;
  double entropy_normalized = 0.0;
  std::map<std::string, double> coverage_by_site;
  double mean_coverage = 0.0;
  double d_act_score = 0.0;
  double d_pkt_spread = 0.0;
};

struct DiversityReport {
  double alpha = 0.5;
  size_t action_count = 0;
  std::string encoder_provenance;  // which encoder produced the embeddings
  std::vector<PersonaDiversity> personas;
};

}  // namespace pfp::metrics
