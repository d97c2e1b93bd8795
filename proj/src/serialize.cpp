#include "xaudit/serialize.hpp"

#include <ostream>

#include "xaudit/csv.hpp"

namespace xaudit::io {

namespace {

const char* kind_tag(FeatureKind k) { return k == FeatureKind::Continuous ? "continuous" : "level"; }

template <typename T>
T field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key))
        throw DataError(std::string("model document: missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model document: bad field '") + key + "': " + e.what());
    }
}

Json standardizer_json(const Standardizer& s) {
    return {{"means", s.means}, {"inv_scales", s.inv_scales}};
}

Standardizer standardizer_from(const Json& j) {
    Standardizer s;
    s.means = field<std::vector<double>>(j, "means");
    s.inv_scales = field<std::vector<double>>(j, "inv_scales");
    if (s.means.size() != s.inv_scales.size()) throw DataError("model document: standardizer sizes differ");
    return s;
}

Json node_json(const DecisionTree& tree, int index) {
    const TreeNode& n = tree.nodes.at(static_cast<std::size_t>(index));
    Json j = {{"value", n.value},
              {"n_samples", n.n_samples},
              {"impurity", n.impurity},
              {"positives", n.positives}};
    if (!n.is_leaf()) {
        j["feature"] = n.feature;
        j["threshold"] = n.threshold;
        j["impurity_decrease"] = n.impurity_decrease;
        j["left"] = node_json(tree, n.left);
        j["right"] = node_json(tree, n.right);
    }
    return j;
}

int read_node(const Json& j, DecisionTree& tree) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    TreeNode n;
    n.value = field<double>(j, "value");
    n.n_samples = field<double>(j, "n_samples");
    n.impurity = field<double>(j, "impurity");
    n.positives = field<double>(j, "positives");
    if (j.contains("feature")) {
        n.feature = field<int>(j, "feature");
        n.threshold = field<double>(j, "threshold");
        n.impurity_decrease = field<double>(j, "impurity_decrease");
        n.left = read_node(j.at("left"), tree);
        n.right = read_node(j.at("right"), tree);
    }
    tree.nodes[static_cast<std::size_t>(index)] = n;
    return index;
}

Json trees_json(std::span<const DecisionTree> trees) {
    Json a = Json::array();
    for (const auto& t : trees) a.push_back(to_json(t));
    return a;
}

std::vector<DecisionTree> trees_from(const Json& a) {
    std::vector<DecisionTree> out;
    for (const auto& t : a) out.push_back(tree_from_json(t));
    return out;
}

struct ModelWriter {
    Json operator()(const LogisticModel& m) const {
        return {{"standardizer", standardizer_json(m.standardizer)},
                {"weights", m.weights},
                {"intercept", m.intercept},
                {"iterations", m.iterations},
                {"converged", m.converged},
                {"separated", m.separated},
                {"separation_capped", m.separation_capped},
                {"gradient_norm", m.gradient_norm}};
    }
    Json operator()(const ForestModel& m) const {
        return {{"n_features", m.n_features},
                {"trees", trees_json(m.trees)},
                {"tree_seeds", m.tree_seeds},
                {"params",
                 {{"n_trees", m.params.n_trees},
                  {"max_depth", m.params.max_depth},
                  {"min_samples_leaf", m.params.min_samples_leaf},
                  {"features_per_split", m.params.features_per_split},
                  {"seed", m.params.seed}}}};
    }
    Json operator()(const BoostedModel& m) const {
        return {{"n_features", m.n_features},
                {"initial_score", m.initial_score},
                {"learning_rate", m.learning_rate},
                {"stages", trees_json(m.stages)},
                {"training_loss", m.training_loss}};
    }
    Json operator()(const MlpModel& m) const {
        return {{"standardizer", standardizer_json(m.standardizer)},
                {"widths", m.widths},
                {"params", m.params},
                {"running_mean", m.running_mean},
                {"running_var", m.running_var},
                {"dropout_rate", m.dropout_rate},
                {"bn_epsilon", m.bn_epsilon},
                {"loss_curve", m.loss_curve}};
    }
};

TrainedModel::Variant read_model(ModelKind kind, const Json& j) {
    switch (kind) {
        case ModelKind::Logistic: {
            LogisticModel m;
            m.standardizer = standardizer_from(field<Json>(j, "standardizer"));
            m.weights = field<std::vector<double>>(j, "weights");
            m.intercept = field<double>(j, "intercept");
            m.iterations = field<std::size_t>(j, "iterations");
            m.converged = field<bool>(j, "converged");
            m.separated = field<bool>(j, "separated");
            m.separation_capped = field<bool>(j, "separation_capped");
            m.gradient_norm = field<double>(j, "gradient_norm");
            if (m.weights.size() != m.standardizer.size())
                throw DataError("model document: weight count differs from standardizer");
            return m;
        }
        case ModelKind::RandomForest: {
            ForestModel m;
            m.n_features = field<std::size_t>(j, "n_features");
            m.trees = trees_from(field<Json>(j, "trees"));
            m.tree_seeds = field<std::vector<std::uint64_t>>(j, "tree_seeds");
            const Json p = field<Json>(j, "params");
            m.params.n_trees = field<std::size_t>(p, "n_trees");
            m.params.max_depth = field<std::size_t>(p, "max_depth");
            m.params.min_samples_leaf = field<std::size_t>(p, "min_samples_leaf");
            m.params.features_per_split = field<std::size_t>(p, "features_per_split");
            m.params.seed = field<std::uint64_t>(p, "seed");
            return m;
        }
        case ModelKind::GradientBoosting: {
            BoostedModel m;
            m.n_features = field<std::size_t>(j, "n_features");
            m.initial_score = field<double>(j, "initial_score");
            m.learning_rate = field<double>(j, "learning_rate");
            m.stages = trees_from(field<Json>(j, "stages"));
            m.training_loss = field<std::vector<double>>(j, "training_loss");
            return m;
        }
        case ModelKind::Mlp: {
            MlpModel m;
            m.standardizer = standardizer_from(field<Json>(j, "standardizer"));
            m.widths = field<std::vector<std::size_t>>(j, "widths");
            m.params = field<std::vector<double>>(j, "params");
            m.running_mean = field<std::vector<std::vector<double>>>(j, "running_mean");
            m.running_var = field<std::vector<std::vector<double>>>(j, "running_var");
            m.dropout_rate = field<double>(j, "dropout_rate");
            m.bn_epsilon = field<double>(j, "bn_epsilon");
            m.loss_curve = field<std::vector<double>>(j, "loss_curve");
            if (MlpLayout::of(m.n_inputs(), m.widths).total != m.params.size())
                throw DataError("model document: MLP parameter count does not match its layout");
            return m;
        }
    }
    throw DataError("model document: unknown kind");
}

std::string num(double v) { return csv::format_double(v); }

}  // namespace

std::string canonical_dump(const Json& value) { return value.dump(2) + "\n"; }

Json to_json(const FeatureSchema& schema) {
    Json features = Json::array();
    for (const auto& f : schema.features()) {
        Json e = {{"name", f.name}, {"kind", kind_tag(f.kind)}};
        if (f.kind == FeatureKind::CategoricalLevel) {
            e["group"] = f.group;
            e["level"] = f.level;
        }
        features.push_back(std::move(e));
    }
    return {{"features", features},
            {"label_column", schema.label_column()},
            {"positive_label", schema.positive_label()},
            {"hash", schema.hash()}};
}

FeatureSchema schema_from_json(const Json& j) {
    std::vector<FeatureSpec> features;
    for (const auto& e : field<Json>(j, "features")) {
        FeatureSpec f;
        f.name = field<std::string>(e, "name");
        const auto kind = field<std::string>(e, "kind");
        if (kind == "level") {
            f.kind = FeatureKind::CategoricalLevel;
            f.group = field<std::string>(e, "group");
            f.level = field<std::string>(e, "level");
        } else if (kind != "continuous") {
            throw DataError("schema: unknown feature kind '" + kind + "'");
        }
        features.push_back(std::move(f));
    }
    FeatureSchema schema(std::move(features), field<std::string>(j, "label_column"),
                         field<std::string>(j, "positive_label"));
    if (j.contains("hash") && j.at("hash").get<std::string>() != schema.hash())
        throw DataError("schema: stored hash does not match its contents");
    return schema;
}

Json to_json(const DecisionTree& tree) {
    if (tree.nodes.empty()) return Json::object();
    return node_json(tree, 0);
}

DecisionTree tree_from_json(const Json& j) {
    DecisionTree tree;
    if (j.is_object() && !j.empty()) read_node(j, tree);
    return tree;
}

Json model_to_json(const TrainedModel& model) {
    return {{"format", "xaudit-model"},
            {"version", kModelFormatVersion},
            {"kind", std::string(to_string(model.kind()))},
            {"schema_hash", model.schema_hash()},
            {"model", std::visit(ModelWriter{}, model.model())}};
}

TrainedModel model_from_json(const Json& j, const std::string& expected_schema_hash) {
    if (field<std::string>(j, "format") != "xaudit-model") throw DataError("not a model document");
    const int version = field<int>(j, "version");
    if (version != kModelFormatVersion)
        throw DataError("model document version " + std::to_string(version) + " is not supported");
    const std::string hash = field<std::string>(j, "schema_hash");
    if (!expected_schema_hash.empty() && hash != expected_schema_hash)
        throw DataError("model was trained on schema " + hash + ", data has schema " +
                        expected_schema_hash);
    ModelKind kind;
    try {
        kind = parse_model_kind(field<std::string>(j, "kind"));
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    }
    return TrainedModel(read_model(kind, field<Json>(j, "model")), hash);
}

Json to_json(const ImportanceRanking& ranking) {
    Json entries = Json::array();
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
        const auto& e = ranking.entries[i];
        entries.push_back({{"rank", i + 1}, {"feature", e.feature}, {"score", e.score}, {"raw", e.raw}});
    }
    return {{"technique", ranking.technique}, {"model", ranking.model}, {"entries", entries}};
}

ImportanceRanking ranking_from_json(const Json& j) {
    std::vector<std::string> names;
    std::vector<double> raw;
    for (const auto& e : field<Json>(j, "entries")) {
        names.push_back(field<std::string>(e, "feature"));
        raw.push_back(field<double>(e, "raw"));
    }
    return ImportanceRanking::from_scores(names, raw, field<std::string>(j, "technique"),
                                          field<std::string>(j, "model"));
}

Json to_json(const Attribution& a) {
    return {{"instance", a.instance_id}, {"names", a.names},          {"values", a.values},
            {"base_value", a.base_value}, {"prediction", a.prediction}, {"technique", a.technique}};
}

Json to_json(const GamResult& r) {
    Json clusters = Json::array();
    for (const auto& c : r.clusters)
        clusters.push_back({{"medoid", c.medoid},
                            {"medoid_id", c.medoid_id},
                            {"proportion", c.proportion},
                            {"members", c.members}});
    return {{"names", r.names},
            {"k", r.k},
            {"mode", r.mode == GamMode::Unsupervised ? "unsupervised" : "label_forced"},
            {"clusters", clusters},
            {"objective_history", r.objective_history}};
}

Json to_json(const PerturbationCurve& c) {
    Json j = {{"feature", c.feature},       {"categorical", c.categorical}, {"grid", c.grid},
              {"values", c.values},         {"base_value", c.base_value},   {"model", c.model},
              {"warnings", c.warnings}};
    if (c.categorical) {
        j["group"] = c.group;
        j["level"] = c.level;
    }
    return j;
}

Json to_json(const SensitivityScore& s) {
    return {{"feature", s.feature},
            {"score", s.score},
            {"monotone", s.monotone},
            {"reversal_points", s.reversal_points}};
}

Json to_json(const ConsistencyReport& report) {
    Json blocks = Json::array();
    for (const auto& b : report.blocks) {
        Json features = Json::array();
        for (const auto& f : b.features)
            features.push_back({{"feature", f.feature},
                                {"static_rank", f.static_rank},
                                {"dynamic_rank", f.dynamic_rank},
                                {"static_score", f.static_score},
                                {"sensitivity", f.sensitivity},
                                {"monotone", f.monotone},
                                {"reversal_points", f.reversal_points},
                                {"flags", f.flags}});
        blocks.push_back({{"model", b.model},
                          {"technique", b.technique},
                          {"compared", b.compared},
                          {"spearman", b.spearman},
                          {"k", b.k},
                          {"top_k_overlap", b.top_k_overlap},
                          {"flag_count", b.flag_count()},
                          {"verdict", b.verdict},
                          {"features", features}});
    }
    const auto& c = report.config;
    return {{"config",
             {{"k", c.k},
              {"flatness_threshold", c.flatness_threshold},
              {"consistent_rho", c.consistent_rho},
              {"partial_rho", c.partial_rho}}},
            {"blocks", blocks},
            {"skipped", report.skipped},
            {"verdicts", report.verdicts}};
}

Json to_json(const LoadReport& r) {
    return {{"kept", r.kept},
            {"dropped_parse", r.dropped_parse},
            {"dropped_label", r.dropped_label},
            {"dropped_level", r.dropped_level}};
}

Json to_json(const Confusion& c) {
    return {{"accuracy", c.accuracy},
            {"true_good", c.true_good},
            {"true_bad", c.true_bad},
            {"false_good", c.false_good},
            {"false_bad", c.false_bad}};
}

void write_rankings_csv(std::span<const ImportanceRanking> rankings, std::ostream& out) {
    csv::write_record(out, {"feature", "score", "raw", "rank", "technique", "model"});
    for (const auto& r : rankings)
        for (std::size_t i = 0; i < r.entries.size(); ++i) {
            const auto& e = r.entries[i];
            csv::write_record(out, {e.feature, num(e.score), num(e.raw), std::to_string(i + 1),
                                    r.technique, r.model});
        }
}

void write_attributions_csv(std::span<const Attribution> attributions, const std::string& model,
                            std::ostream& out) {
    csv::write_record(out, {"instance", "feature", "value", "base_value", "prediction", "technique", "model"});
    for (const auto& a : attributions)
        for (std::size_t j = 0; j < a.names.size(); ++j)
            csv::write_record(out, {a.instance_id, a.names[j], num(a.values[j]), num(a.base_value),
                                    num(a.prediction), a.technique, model});
}

void write_curves_csv(std::span<const PerturbationCurve> curves, std::ostream& out) {
    csv::write_record(out, {"model", "feature", "grid", "value", "base"});
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.grid.size(); ++i)
            csv::write_record(out, {c.model, c.feature, num(c.grid[i]), num(c.values[i]), num(c.base_value)});
}

}  // namespace xaudit::io
