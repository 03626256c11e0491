#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "livsynth/cost.hpp"
#include "livsynth/evolve.hpp"

namespace livsynth {

using json = nlohmann::json;

/// Structured genome: width plus one object per gene with named fields.
json genome_to_json(const BackboneGenome& g);
BackboneGenome genome_from_json(const json& j);

/// Non-finite values are written as null and read back as +infinity.
json score_to_json(const ScoreVector& s, const std::vector<Objective>& objectives);
ScoreVector score_from_json(const json& j, const std::vector<Objective>& objectives);

json cost_to_json(const CostReport& r);

/// One line of the results log.
json record_to_json(const HistoryRecord& r, const std::vector<Objective>& objectives);
HistoryRecord record_from_json(const json& j, const std::vector<Objective>& objectives);

/// Snapshot of a run after a completed generation, enough to resume it.
json state_to_json(const EvolutionState& s, const std::vector<Objective>& objectives);
EvolutionState state_from_json(const json& j, const std::vector<Objective>& objectives);

}  // namespace livsynth
