#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "xaudit/common.hpp"

namespace xaudit {

enum class FeatureKind { Continuous, CategoricalLevel };

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::Continuous;
    std::string group;  // empty for continuous features
    std::string level;

    bool operator==(const FeatureSpec&) const = default;
};

/// Column name used for one level of a one-hot group.
std::string level_column_name(std::string_view group, std::string_view level);

struct CategoricalGroup {
    std::string name;
    std::vector<std::string> levels;
    std::vector<std::size_t> columns;  // parallel to levels
};

/// Unit of attribution and perturbation: a continuous column, or a whole
/// one-hot group (a coalition keeps or replaces every column of it).
struct Player {
    std::string name;
    std::vector<std::size_t> columns;
    bool categorical = false;
};

struct GroupSpec {
    std::string name;
    std::vector<std::string> levels;
};

class FeatureSchema {
public:
    FeatureSchema() = default;
    explicit FeatureSchema(std::vector<FeatureSpec> features, std::string label_column = "label",
                           std::string positive_label = "good");

    /// Continuous columns first, then every group's levels in order.
    static FeatureSchema build(const std::vector<std::string>& continuous,
                               const std::vector<GroupSpec>& groups,
                               std::string label_column = "label",
                               std::string positive_label = "good");

    const std::vector<FeatureSpec>& features() const { return features_; }
    std::size_t n_features() const { return features_.size(); }
    const FeatureSpec& feature(std::size_t j) const { return features_.at(j); }
    std::vector<std::string> names() const;

    std::optional<std::size_t> index_of(std::string_view name) const;
    std::size_t require_index(std::string_view name) const;

    const std::vector<CategoricalGroup>& groups() const { return groups_; }
    const CategoricalGroup& group(std::string_view name) const;
    bool has_group(std::string_view name) const;

    std::vector<Player> players() const;

    const std::string& label_column() const { return label_column_; }
    const std::string& positive_label() const { return positive_label_; }

    /// Hash of the canonical schema description; embedded in serialized models.
    std::string hash() const;

    bool operator==(const FeatureSchema& other) const {
        return features_ == other.features_ && label_column_ == other.label_column_ &&
               positive_label_ == other.positive_label_;
    }

private:
    std::vector<FeatureSpec> features_;
    std::vector<CategoricalGroup> groups_;
    std::string label_column_ = "label";
    std::string positive_label_ = "good";
};

/// Immutable labelled design matrix. Labels: 1 = good, 0 = bad.
class Dataset {
public:
    Dataset() = default;
    Dataset(FeatureSchema schema, Matrix rows, std::vector<int> labels,
            std::vector<std::string> row_ids);

    const FeatureSchema& schema() const { return schema_; }
    const Matrix& rows() const { return rows_; }
    const std::vector<int>& labels() const { return labels_; }
    const std::vector<std::string>& row_ids() const { return row_ids_; }
    std::size_t size() const { return rows_.rows(); }
    std::size_t n_features() const { return schema_.n_features(); }

    /// [bad count, good count]
    std::array<std::size_t, 2> class_counts() const;
    Dataset subset(std::span<const std::size_t> indices) const;

    bool operator==(const Dataset&) const = default;

private:
    FeatureSchema schema_;
    Matrix rows_;
    std::vector<int> labels_;
    std::vector<std::string> row_ids_;
};

/// Throws DataError unless every one-hot group in `rows` sums to exactly 1.
void check_one_hot(const FeatureSchema& schema, const Matrix& rows);

enum class LabelOutcome { Good, Bad, Drop };

struct LabelRule {
    std::set<std::string> good_statuses;
    std::set<std::string> bad_statuses;

    LabelOutcome classify(std::string_view status) const;
    void validate() const;
};

/// Lending Club `loan_status` vocabulary.
LabelRule default_lending_club_rule();

struct DataConfig {
    std::vector<std::string> continuous;
    std::vector<GroupSpec> categorical;  // empty level list: infer from the file
    std::string label_column = "label";
    std::string positive_label = "good";
    std::string id_column;  // optional
    LabelRule label_rule;
};

struct LoadReport {
    std::size_t raw_rows = 0;
    std::size_t kept = 0;
    std::size_t dropped_parse = 0;
    std::size_t dropped_label = 0;
    std::size_t dropped_level = 0;

    std::size_t dropped() const { return dropped_parse + dropped_label + dropped_level; }
};

struct LoadResult {
    Dataset data;
    LoadReport report;
};

LoadResult load_csv(const std::string& path, const DataConfig& config);
LoadResult load_csv(std::istream& in, const DataConfig& config);

/// Writes the raw (decoded) form: id, continuous columns, one column per
/// group holding the level, then the label column holding a status string.
void write_csv(const Dataset& data, std::ostream& out, std::string_view good_status = "good",
               std::string_view bad_status = "bad", std::string_view id_column = "id");

/// Config that reloads a file produced by write_csv bit-identically.
DataConfig csv_config_for(const FeatureSchema& schema, std::string_view good_status = "good",
                          std::string_view bad_status = "bad", std::string_view id_column = "id");

struct OneHotResult {
    Matrix encoded;                 // one row per kept value, one column per level
    std::vector<std::size_t> kept;  // input positions that were encoded
    std::size_t dropped = 0;        // values outside the vocabulary
};

OneHotResult encode_one_hot(std::span<const std::string> values,
                            std::span<const std::string> levels);
std::vector<std::string> decode_one_hot(const Matrix& encoded,
                                        std::span<const std::string> levels);

Dataset balanced_sample(const Dataset& data, std::size_t n, std::uint64_t seed);

struct Split {
    Dataset train;
    Dataset holdout;
};

Split train_holdout_split(const Dataset& data, double holdout_fraction, std::uint64_t seed);

enum class Distribution { Uniform, LogNormal };

struct ContinuousSynth {
    std::string name;
    Distribution distribution = Distribution::Uniform;
    double a = 0.0;  // Uniform: low; LogNormal: log-mean
    double b = 1.0;  // Uniform: high; LogNormal: log-sd
};

struct GroupSynth {
    std::string name;
    std::vector<std::string> levels;
    std::vector<double> probabilities;
};

struct SyntheticSpec {
    std::size_t n_rows = 0;
    std::vector<ContinuousSynth> continuous;
    std::vector<GroupSynth> groups;
    std::vector<double> true_weights;  // one per schema column
    double intercept = 0.0;
    double label_noise = 0.0;

    FeatureSchema schema() const;
    void validate() const;
};

struct SyntheticData {
    Dataset data;
    std::vector<double> true_weights;
    double intercept = 0.0;
};

/// Labels ~ Bernoulli(sigmoid(w.x + b)), then each flipped with probability
/// label_noise.
SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace xaudit
