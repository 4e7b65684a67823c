// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "pfp/metrics/confusion.hpp"

namespace pfp::metrics {

// Misattribution summary for the open-world class (the final row/column of
// the confusion matrix). All fields are percentages in [0, 100], and
// misattr_at_ow is 100 - ow_recall by identity.
struct OwReport {
  double ow_precision = 0.0;
  double ow_recall = 0.0;
  double ow_f1 = 0.0;
  double misattr_at_ow = 0.0;
  double top3_share = 0.0;
  std::vector<std::string> top3_personas;  // up to three, most-confused first
};

// cm must include the OW class as its last label. Errors if the OW row is
// empty (no open-world windows were evaluated). top3_share is the share of
// misattributed OW windows landing in the three most-predicted canonical
// classes; ties break toward the lower class index, and it is defined as 0
// when there are no misattributions.
OwReport ow_report(const ConfusionMatrix& cm);

}  // namespace pfp::metrics
