// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <json.hpp>

#include "pfp/cli/config.hpp"
#include "pfp/metrics/consistency.hpp"
#include "pfp/metrics/diversity.hpp"
#include "pfp/metrics/openworld.hpp"
#include "pfp/sim/spec.hpp"
#include "pfp/tasks/train.hpp"
#include "pfp/trace/manifest.hpp"

namespace pfp::cli {

// JSON builders for report sections. Percentages carry one decimal; unit
// scores carry four.
nlohmann::json classification_section(const metrics::ConfusionMatrix& cm);
nlohmann::json ow_section(const metrics::OwReport& ow);
nlohmann::json diversity_section(const metrics::DiversityReport& d);
nlohmann::json consistency_section(const metrics::ConsistencyReport& c);

// Test-split metrics for a trained model: site_metrics / persona_metrics /
// ow_report as applicable.
nlohmann::json model_report(const tasks::TrainedModel& model, const tasks::LoadedDataset& ds);

// Behavioral diagnostics joined from the action log, the dataset manifest,
// the site/persona profiles, and embeddings from `model`'s encoder.
metrics::DiversityReport build_diversity_report(const ResolvedProfiles& profiles,
                                                const trace::DatasetManifest& manifest,
                                                const std::filesystem::path& actions_path,
                                                const tasks::LoadedDataset& ds,
                                                const tasks::TrainedModel& model, double alpha);

// Persona-description vs trajectory-summary alignment for canonical
// personas (the folded OW label has no single description to score against).
metrics::ConsistencyReport build_consistency_report(const ResolvedProfiles& profiles,
                                                    const trace::DatasetManifest& manifest,
                                                    const std::filesystem::path& actions_path,
                                                    int64_t segment_len, double flag_floor);

}  // namespace pfp::cli
