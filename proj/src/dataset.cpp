#include "xaudit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "xaudit/csv.hpp"

namespace xaudit {

std::string level_column_name(std::string_view group, std::string_view level) {
    std::string name(group);
    name += '=';
    name += level;
    return name;
}

// ---------------------------------------------------------------------------
// FeatureSchema

FeatureSchema::FeatureSchema(std::vector<FeatureSpec> features, std::string label_column,
                             std::string positive_label)
    : features_(std::move(features)),
      label_column_(std::move(label_column)),
      positive_label_(std::move(positive_label)) {
    std::set<std::string> seen;
    for (std::size_t j = 0; j < features_.size(); ++j) {
        const auto& f = features_[j];
        if (f.name.empty()) throw ConfigError("schema: empty feature name");
        if (!seen.insert(f.name).second) throw ConfigError("schema: duplicate feature " + f.name);
        if (f.kind == FeatureKind::Continuous) continue;
        if (f.group.empty()) throw ConfigError("schema: level " + f.name + " has no group");
        auto it = std::find_if(groups_.begin(), groups_.end(),
                               [&](const CategoricalGroup& g) { return g.name == f.group; });
        if (it == groups_.end()) {
            groups_.push_back({f.group, {}, {}});
            it = std::prev(groups_.end());
        }
        if (std::find(it->levels.begin(), it->levels.end(), f.level) != it->levels.end())
            throw ConfigError("schema: duplicate level " + f.level + " in group " + f.group);
        it->levels.push_back(f.level);
        it->columns.push_back(j);
    }
    for (const auto& g : groups_) {
        if (seen.count(g.name))
            throw ConfigError("schema: group name " + g.name + " collides with a feature");
        if (g.levels.size() < 2) throw ConfigError("schema: group " + g.name + " needs >= 2 levels");
    }
}

FeatureSchema FeatureSchema::build(const std::vector<std::string>& continuous,
                                   const std::vector<GroupSpec>& groups, std::string label_column,
                                   std::string positive_label) {
    std::vector<FeatureSpec> features;
    for (const auto& name : continuous) features.push_back({name, FeatureKind::Continuous, {}, {}});
    for (const auto& g : groups)
        for (const auto& level : g.levels)
            features.push_back(
                {level_column_name(g.name, level), FeatureKind::CategoricalLevel, g.name, level});
    return FeatureSchema(std::move(features), std::move(label_column), std::move(positive_label));
}

std::vector<std::string> FeatureSchema::names() const {
    std::vector<std::string> out;
    out.reserve(features_.size());
    for (const auto& f : features_) out.push_back(f.name);
    return out;
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
    for (std::size_t j = 0; j < features_.size(); ++j)
        if (features_[j].name == name) return j;
    return std::nullopt;
}

std::size_t FeatureSchema::require_index(std::string_view name) const {
    auto j = index_of(name);
    if (!j) throw ConfigError("unknown feature: " + std::string(name));
    return *j;
}

const CategoricalGroup& FeatureSchema::group(std::string_view name) const {
    for (const auto& g : groups_)
        if (g.name == name) return g;
    throw ConfigError("unknown categorical group: " + std::string(name));
}

bool FeatureSchema::has_group(std::string_view name) const {
    return std::any_of(groups_.begin(), groups_.end(),
                       [&](const CategoricalGroup& g) { return g.name == name; });
}

std::vector<Player> FeatureSchema::players() const {
    std::vector<Player> out;
    std::set<std::string> emitted;
    for (std::size_t j = 0; j < features_.size(); ++j) {
        const auto& f = features_[j];
        if (f.kind == FeatureKind::Continuous) {
            out.push_back({f.name, {j}, false});
        } else if (emitted.insert(f.group).second) {
            out.push_back({f.group, group(f.group).columns, true});
        }
    }
    return out;
}

std::string FeatureSchema::hash() const {
    std::ostringstream canon;
    canon << label_column_ << '\x1f' << positive_label_ << '\x1e';
    for (const auto& f : features_)
        canon << f.name << '\x1f' << static_cast<int>(f.kind) << '\x1f' << f.group << '\x1f'
              << f.level << '\x1e';
    return fnv1a_hex(canon.str());
}

// ---------------------------------------------------------------------------
// Dataset

void check_one_hot(const FeatureSchema& schema, const Matrix& rows) {
    for (const auto& g : schema.groups()) {
        for (std::size_t i = 0; i < rows.rows(); ++i) {
            int ones = 0;
            for (std::size_t c : g.columns) {
                const double v = rows(i, c);
                if (v == 1.0) {
                    ++ones;
                } else if (v != 0.0) {
                    throw DataError("group " + g.name + " is not one-hot at row " +
                                    std::to_string(i));
                }
            }
            if (ones != 1)
                throw DataError("group " + g.name + " is not one-hot at row " + std::to_string(i));
        }
    }
}

Dataset::Dataset(FeatureSchema schema, Matrix rows, std::vector<int> labels,
                 std::vector<std::string> row_ids)
    : schema_(std::move(schema)),
      rows_(std::move(rows)),
      labels_(std::move(labels)),
      row_ids_(std::move(row_ids)) {
    if (rows_.rows() > 0 && rows_.cols() != schema_.n_features())
        throw DataError("dataset: row width does not match schema");
    if (labels_.size() != rows_.rows()) throw DataError("dataset: label count != row count");
    if (row_ids_.size() != rows_.rows()) throw DataError("dataset: row id count != row count");
    for (int y : labels_)
        if (y != 0 && y != 1) throw DataError("dataset: labels must be 0 or 1");
    check_one_hot(schema_, rows_);
}

std::array<std::size_t, 2> Dataset::class_counts() const {
    std::array<std::size_t, 2> counts{0, 0};
    for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<int> labels;
    std::vector<std::string> ids;
    labels.reserve(indices.size());
    ids.reserve(indices.size());
    for (std::size_t i : indices) {
        labels.push_back(labels_.at(i));
        ids.push_back(row_ids_.at(i));
    }
    Matrix rows = rows_.select_rows(indices);
    if (indices.empty()) rows = Matrix(0, schema_.n_features());
    return Dataset(schema_, std::move(rows), std::move(labels), std::move(ids));
}

// ---------------------------------------------------------------------------
// Labels

LabelOutcome LabelRule::classify(std::string_view status) const {
    const std::string s(status);
    if (good_statuses.count(s)) return LabelOutcome::Good;
    if (bad_statuses.count(s)) return LabelOutcome::Bad;
    return LabelOutcome::Drop;
}

void LabelRule::validate() const {
    if (good_statuses.empty() || bad_statuses.empty())
        throw ConfigError("label rule: both good and bad status sets must be non-empty");
    for (const auto& s : good_statuses)
        if (bad_statuses.count(s))
            throw ConfigError("label rule: status '" + s + "' is both good and bad");
}

LabelRule default_lending_club_rule() {
    LabelRule rule;
    rule.good_statuses = {"Fully Paid", "Current",
                          "Does not meet the credit policy. Status:Fully Paid"};
    rule.bad_statuses = {"Charged Off",
                         "Default",
                         "Late (31-120 days)",
                         "Late (16-30 days)",
                         "In Grace Period",
                         "Does not meet the credit policy. Status:Charged Off"};
    return rule;
}

// ---------------------------------------------------------------------------
// One-hot

OneHotResult encode_one_hot(std::span<const std::string> values,
                            std::span<const std::string> levels) {
    std::map<std::string_view, std::size_t> lookup;
    for (std::size_t k = 0; k < levels.size(); ++k) lookup.emplace(levels[k], k);
    OneHotResult out;
    out.encoded = Matrix(0, levels.size());
    std::vector<double> row(levels.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto it = lookup.find(values[i]);
        if (it == lookup.end()) {
            ++out.dropped;
            continue;
        }
        std::fill(row.begin(), row.end(), 0.0);
        row[it->second] = 1.0;
        out.encoded.append_row(row);
        out.kept.push_back(i);
    }
    return out;
}

std::vector<std::string> decode_one_hot(const Matrix& encoded,
                                        std::span<const std::string> levels) {
    if (encoded.cols() != levels.size()) throw DataError("decode_one_hot: width mismatch");
    std::vector<std::string> out;
    out.reserve(encoded.rows());
    for (std::size_t i = 0; i < encoded.rows(); ++i) {
        auto r = encoded.row(i);
        auto hit = std::find(r.begin(), r.end(), 1.0);
        if (hit == r.end()) throw DataError("decode_one_hot: row without a hot level");
        out.push_back(levels[static_cast<std::size_t>(hit - r.begin())]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("missing column: " + name);
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

LoadResult load_csv(const std::string& path, const DataConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return load_csv(in, config);
}

LoadResult load_csv(std::istream& in, const DataConfig& config) {
    config.label_rule.validate();

    std::vector<std::string> header;
    if (!csv::read_record(in, header)) throw DataError("empty CSV: no header row");
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

    const std::size_t label_col = find_column(header, config.label_column);
    const std::optional<std::size_t> id_col =
        config.id_column.empty() ? std::nullopt
                                 : std::optional(find_column(header, config.id_column));
    std::vector<std::size_t> cont_cols;
    for (const auto& name : config.continuous) cont_cols.push_back(find_column(header, name));
    std::vector<std::size_t> cat_cols;
    for (const auto& g : config.categorical) cat_cols.push_back(find_column(header, g.name));

    LoadReport report;
    std::vector<std::vector<std::string>> records;
    std::vector<std::size_t> line_numbers;
    std::vector<int> labels;
    std::vector<std::string> fields;
    std::size_t line = 0;
    while (csv::read_record(in, fields)) {
        ++line;
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        ++report.raw_rows;
        if (fields.size() != header.size()) {
            ++report.dropped_parse;
            continue;
        }
        const LabelOutcome outcome = config.label_rule.classify(fields[label_col]);
        if (outcome == LabelOutcome::Drop) {
            ++report.dropped_label;
            continue;
        }
        labels.push_back(outcome == LabelOutcome::Good ? 1 : 0);
        records.push_back(fields);
        line_numbers.push_back(line);
    }

    // Vocabularies: configured, or the sorted set of observed values.
    std::vector<GroupSpec> groups = config.categorical;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (!groups[g].levels.empty()) continue;
        std::set<std::string> seen;
        for (const auto& r : records) seen.insert(r[cat_cols[g]]);
        groups[g].levels.assign(seen.begin(), seen.end());
    }
    FeatureSchema schema =
        FeatureSchema::build(config.continuous, groups, config.label_column, config.positive_label);

    // One-hot blocks per group, computed column-wise.
    std::vector<OneHotResult> encodings;
    std::vector<std::vector<std::ptrdiff_t>> encoded_row(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<std::string> column;
        column.reserve(records.size());
        for (const auto& r : records) column.push_back(r[cat_cols[g]]);
        encodings.push_back(encode_one_hot(column, groups[g].levels));
        encoded_row[g].assign(records.size(), -1);
        for (std::size_t k = 0; k < encodings[g].kept.size(); ++k)
            encoded_row[g][encodings[g].kept[k]] = static_cast<std::ptrdiff_t>(k);
    }

    Matrix rows(0, schema.n_features());
    std::vector<int> kept_labels;
    std::vector<std::string> ids;
    std::vector<double> row(schema.n_features());
    for (std::size_t i = 0; i < records.size(); ++i) {
        bool ok = true;
        for (std::size_t c = 0; c < cont_cols.size() && ok; ++c)
            ok = csv::parse_double(records[i][cont_cols[c]], row[c]);
        if (!ok) {
            ++report.dropped_parse;
            continue;
        }
        bool level_ok = true;
        for (std::size_t g = 0; g < groups.size(); ++g)
            if (encoded_row[g][i] < 0) level_ok = false;
        if (!level_ok) {
            ++report.dropped_level;
            continue;
        }
        for (std::size_t g = 0; g < groups.size(); ++g) {
            auto block = encodings[g].encoded.row(static_cast<std::size_t>(encoded_row[g][i]));
            const auto& cols = schema.group(groups[g].name).columns;
            for (std::size_t k = 0; k < cols.size(); ++k) row[cols[k]] = block[k];
        }
        rows.append_row(row);
        kept_labels.push_back(labels[i]);
        ids.push_back(id_col ? records[i][*id_col] : "row" + std::to_string(line_numbers[i]));
    }
    report.kept = rows.rows();
    if (report.kept == 0) throw DataError("no rows left after filtering");
    return {Dataset(std::move(schema), std::move(rows), std::move(kept_labels), std::move(ids)),
            report};
}

void write_csv(const Dataset& data, std::ostream& out, std::string_view good_status,
               std::string_view bad_status, std::string_view id_column) {
    const auto& schema = data.schema();
    std::vector<std::size_t> continuous;
    for (std::size_t j = 0; j < schema.n_features(); ++j)
        if (schema.feature(j).kind == FeatureKind::Continuous) continuous.push_back(j);

    std::vector<std::string> fields{std::string(id_column)};
    for (std::size_t j : continuous) fields.push_back(schema.feature(j).name);
    for (const auto& g : schema.groups()) fields.push_back(g.name);
    fields.push_back(schema.label_column());
    csv::write_record(out, fields);

    for (std::size_t i = 0; i < data.size(); ++i) {
        fields.clear();
        fields.push_back(data.row_ids()[i]);
        auto r = data.rows().row(i);
        for (std::size_t j : continuous) fields.push_back(csv::format_double(r[j]));
        for (const auto& g : schema.groups()) {
            for (std::size_t k = 0; k < g.columns.size(); ++k)
                if (r[g.columns[k]] == 1.0) fields.push_back(g.levels[k]);
        }
        fields.emplace_back(data.labels()[i] == 1 ? good_status : bad_status);
        csv::write_record(out, fields);
    }
}

DataConfig csv_config_for(const FeatureSchema& schema, std::string_view good_status,
                          std::string_view bad_status, std::string_view id_column) {
    DataConfig config;
    for (const auto& f : schema.features())
        if (f.kind == FeatureKind::Continuous) config.continuous.push_back(f.name);
    for (const auto& g : schema.groups()) config.categorical.push_back({g.name, g.levels});
    config.label_column = schema.label_column();
    config.positive_label = schema.positive_label();
    config.id_column = std::string(id_column);
    config.label_rule.good_statuses = {std::string(good_status)};
    config.label_rule.bad_statuses = {std::string(bad_status)};
    return config;
}

// ---------------------------------------------------------------------------
// Sampling

Dataset balanced_sample(const Dataset& data, std::size_t n, std::uint64_t seed) {
    if (n == 0 || n % 2 != 0) throw ConfigError("balanced_sample: n must be even and positive");
    const std::size_t half = n / 2;
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < data.size(); ++i)
        by_class[static_cast<std::size_t>(data.labels()[i])].push_back(i);
    static constexpr const char* kNames[2] = {"bad", "good"};
    for (std::size_t c = 0; c < 2; ++c)
        if (by_class[c].size() < half)
            throw DataError("class " + std::string(kNames[c]) + " has " +
                            std::to_string(by_class[c].size()) + " < " + std::to_string(half));

    std::vector<std::size_t> chosen;
    for (std::size_t c = 0; c < 2; ++c) {
        Rng rng(derive_seed(seed, c));
        auto pick = sample_without_replacement(by_class[c], half, rng);
        chosen.insert(chosen.end(), pick.begin(), pick.end());
    }
    std::sort(chosen.begin(), chosen.end());
    return data.subset(chosen);
}

Split train_holdout_split(const Dataset& data, double holdout_fraction, std::uint64_t seed) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw ConfigError("holdout fraction must lie in (0, 1)");
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < data.size(); ++i)
        by_class[static_cast<std::size_t>(data.labels()[i])].push_back(i);

    std::vector<std::size_t> train;
    std::vector<std::size_t> holdout;
    for (std::size_t c = 0; c < 2; ++c) {
        const auto& pool = by_class[c];
        const auto n_hold = static_cast<std::size_t>(
            std::llround(holdout_fraction * static_cast<double>(pool.size())));
        Rng rng(derive_seed(seed, c));
        auto order = sample_without_replacement(pool, pool.size(), rng);
        holdout.insert(holdout.end(), order.begin(), order.begin() + n_hold);
        train.insert(train.end(), order.begin() + n_hold, order.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(holdout.begin(), holdout.end());
    return {data.subset(train), data.subset(holdout)};
}

// ---------------------------------------------------------------------------
// Synthetic data

FeatureSchema SyntheticSpec::schema() const {
    std::vector<std::string> names;
    for (const auto& c : continuous) names.push_back(c.name);
    std::vector<GroupSpec> specs;
    for (const auto& g : groups) specs.push_back({g.name, g.levels});
    return FeatureSchema::build(names, specs);
}

void SyntheticSpec::validate() const {
    const FeatureSchema s = schema();
    if (true_weights.size() != s.n_features())
        throw ConfigError("synthetic: need one true weight per column (" +
                          std::to_string(s.n_features()) + ")");
    if (!(label_noise >= 0.0 && label_noise < 0.5))
        throw ConfigError("synthetic: label noise must lie in [0, 0.5)");
    for (const auto& c : continuous) {
        if (c.distribution == Distribution::Uniform) {
            if (c.a < 0.0) throw ConfigError("synthetic: " + c.name + " support must be nonnegative");
            if (!(c.b > c.a)) throw ConfigError("synthetic: " + c.name + " has zero variance");
        } else if (!(c.b > 0.0)) {
            throw ConfigError("synthetic: " + c.name + " has zero variance");
        }
    }
    for (const auto& g : groups) {
        if (g.probabilities.size() != g.levels.size())
            throw ConfigError("synthetic: group " + g.name + " needs one probability per level");
        double total = 0.0;
        std::size_t positive = 0;
        for (double p : g.probabilities) {
            if (!(p >= 0.0)) throw ConfigError("synthetic: negative level probability");
            total += p;
            positive += p > 0.0;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw ConfigError("synthetic: group " + g.name + " probabilities must sum to 1");
        if (positive < 2) throw ConfigError("synthetic: group " + g.name + " has zero variance");
    }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    FeatureSchema schema = spec.schema();
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Matrix rows(spec.n_rows, schema.n_features());
    std::vector<int> labels(spec.n_rows);
    std::vector<std::string> ids(spec.n_rows);
    for (std::size_t i = 0; i < spec.n_rows; ++i) {
        auto r = rows.row(i);
        std::size_t col = 0;
        for (const auto& c : spec.continuous) {
            if (c.distribution == Distribution::Uniform) {
                r[col++] = c.a + (c.b - c.a) * unit(rng);
            } else {
                std::lognormal_distribution<double> dist(c.a, c.b);
                r[col++] = dist(rng);
            }
        }
        for (const auto& g : spec.groups) {
            std::discrete_distribution<std::size_t> pick(g.probabilities.begin(),
                                                         g.probabilities.end());
            const std::size_t level = pick(rng);
            for (std::size_t k = 0; k < g.levels.size(); ++k) r[col + k] = k == level ? 1.0 : 0.0;
            col += g.levels.size();
        }
        double z = spec.intercept;
        for (std::size_t j = 0; j < r.size(); ++j) z += spec.true_weights[j] * r[j];
        int y = unit(rng) < sigmoid(z) ? 1 : 0;
        if (unit(rng) < spec.label_noise) y = 1 - y;
        labels[i] = y;
        ids[i] = "s" + std::to_string(i);
    }
    if (spec.n_rows == 0) rows = Matrix(0, schema.n_features());
    return {Dataset(std::move(schema), std::move(rows), std::move(labels), std::move(ids)),
            spec.true_weights, spec.intercept};
}

}  // namespace xaudit
