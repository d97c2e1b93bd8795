#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "xaudit/consistency.hpp"
#include "xaudit/dataset.hpp"
#include "xaudit/explainers.hpp"
#include "xaudit/models.hpp"
#include "xaudit/perturbation.hpp"
#include "xaudit/ranking.hpp"

namespace xaudit::io {

using Json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

/// Sorted keys, two-space indent, shortest round-trip doubles, trailing
/// newline. Identical values always produce identical bytes.
std::string canonical_dump(const Json& value);

Json to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const Json& j);

Json to_json(const DecisionTree& tree);  // nested nodes
DecisionTree tree_from_json(const Json& j);

/// Versioned model document: {format, version, kind, schema_hash, model}.
Json model_to_json(const TrainedModel& model);
/// Throws DataError on a foreign format, an unknown version, or (when
/// `expected_schema_hash` is nonempty) a schema mismatch.
TrainedModel model_from_json(const Json& j, const std::string& expected_schema_hash = {});

Json to_json(const ImportanceRanking& ranking);
ImportanceRanking ranking_from_json(const Json& j);
Json to_json(const Attribution& attribution);
Json to_json(const GamResult& result);
Json to_json(const PerturbationCurve& curve);
Json to_json(const SensitivityScore& score);
Json to_json(const ConsistencyReport& report);
Json to_json(const LoadReport& report);
Json to_json(const Confusion& confusion);

/// Flat CSV: feature, score, raw, rank, technique, model.
void write_rankings_csv(std::span<const ImportanceRanking> rankings, std::ostream& out);
/// Long form: instance, feature, value, base_value, prediction, technique, model.
void write_attributions_csv(std::span<const Attribution> attributions, const std::string& model,
                            std::ostream& out);
/// Long form: model, feature, grid, value, base.
void write_curves_csv(std::span<const PerturbationCurve> curves, std::ostream& out);

}  // namespace xaudit::io
