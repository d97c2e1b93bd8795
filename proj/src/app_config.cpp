#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "xaudit/app.hpp"

namespace xaudit::app {

namespace {

using io::Json;

/// Reads optional keys from one JSON object and rejects any it did not ask
/// for, so a typo in a config file cannot silently fall back to a default.
class ObjectReader {
public:
    ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError("config: " + path_ + " must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: " + where(key) + " has the wrong type");
        }
    }

    const Json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ConfigError("config: unknown key " + where(key.c_str()));
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Distribution parse_distribution(const std::string& s) {
    if (s == "uniform") return Distribution::Uniform;
    if (s == "lognormal") return Distribution::LogNormal;
    throw ConfigError("config: unknown distribution '" + s + "' (uniform, lognormal)");
}

const char* distribution_name(Distribution d) {
    return d == Distribution::Uniform ? "uniform" : "lognormal";
}

void read_synthetic(const Json& j, SyntheticSpec& spec) {
    ObjectReader r(j, "data.synthetic");
    r.get("n_rows", spec.n_rows);
    r.get("intercept", spec.intercept);
    r.get("label_noise", spec.label_noise);
    if (const Json* cont = r.child("continuous")) {
        spec.continuous.clear();
        for (const auto& c : *cont) {
            ObjectReader cr(c, "data.synthetic.continuous[]");
            ContinuousSynth s;
            std::string dist = "uniform";
            cr.get("name", s.name);
            cr.get("distribution", dist);
            cr.get("a", s.a);
            cr.get("b", s.b);
            cr.finish();
            s.distribution = parse_distribution(dist);
            spec.continuous.push_back(s);
        }
    }
    if (const Json* groups = r.child("groups")) {
        spec.groups.clear();
        for (const auto& g : *groups) {
            ObjectReader gr(g, "data.synthetic.groups[]");
            GroupSynth s;
            gr.get("name", s.name);
            gr.get("levels", s.levels);
            gr.get("probabilities", s.probabilities);
            gr.finish();
            spec.groups.push_back(s);
        }
    }
    // Weights are keyed by column name; unnamed columns weigh 0. Without a
    // weights key they are kept unless the columns changed.
    const bool reshaped = j.contains("continuous") || j.contains("groups");
    std::map<std::string, double> weights;
    r.get("weights", weights);
    r.finish();
    if (!j.contains("weights") && !reshaped) return;
    const auto names = spec.schema().names();
    spec.true_weights.assign(names.size(), 0.0);
    for (const auto& [name, w] : weights) {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw ConfigError("config: weight for unknown column '" + name + "'");
        spec.true_weights[static_cast<std::size_t>(it - names.begin())] = w;
    }
}

void read_schema(const Json& j, DataConfig& cfg) {
    ObjectReader r(j, "data.schema");
    r.get("continuous", cfg.continuous);
    r.get("label_column", cfg.label_column);
    r.get("id_column", cfg.id_column);
    if (const Json* cats = r.child("categorical")) {
        cfg.categorical.clear();
        for (const auto& g : *cats) {
            ObjectReader gr(g, "data.schema.categorical[]");
            GroupSpec spec;
            gr.get("name", spec.name);
            gr.get("levels", spec.levels);
            gr.finish();
            cfg.categorical.push_back(spec);
        }
    }
    r.get("good_statuses", cfg.label_rule.good_statuses);
    r.get("bad_statuses", cfg.label_rule.bad_statuses);
    r.finish();
}

std::vector<double> read_grid(ObjectReader& r, const char* key, std::vector<double> fallback) {
    r.get(key, fallback);
    return fallback;
}

}  // namespace

SyntheticSpec default_synthetic_spec() {
    SyntheticSpec s;
    s.n_rows = 40000;
    s.continuous = {{"loan_amnt", Distribution::LogNormal, 9.4, 0.6},
                    {"int_rate", Distribution::Uniform, 5.0, 28.0},
                    {"annual_inc", Distribution::LogNormal, 11.0, 0.5},
                    {"dti", Distribution::Uniform, 0.0, 40.0},
                    {"revol_util", Distribution::Uniform, 0.0, 100.0},
                    {"emp_length", Distribution::Uniform, 0.0, 10.0},
                    {"open_acc", Distribution::Uniform, 2.0, 30.0}};
    s.groups = {{"grade", {"A", "B", "C", "D", "E", "F", "G"}, {0.18, 0.29, 0.27, 0.15, 0.07, 0.03, 0.01}},
                {"term", {"36 months", "60 months"}, {0.75, 0.25}},
                {"home_ownership", {"MORTGAGE", "OWN", "RENT"}, {0.5, 0.1, 0.4}}};
    const std::map<std::string, double> w{
        {"loan_amnt", -2e-5}, {"int_rate", -0.15},  {"annual_inc", 1e-5},      {"dti", -0.03},
        {"revol_util", -0.01}, {"emp_length", 0.05}, {"grade=A", 1.0},          {"grade=B", 0.5},
        {"grade=D", -0.3},    {"grade=E", -0.6},     {"grade=F", -0.9},         {"grade=G", -1.2},
        {"term=60 months", -0.6}, {"home_ownership=MORTGAGE", 0.1}, {"home_ownership=OWN", 0.2}};
    const auto names = s.schema().names();
    s.true_weights.assign(names.size(), 0.0);
    for (std::size_t j = 0; j < names.size(); ++j)
        if (auto it = w.find(names[j]); it != w.end()) s.true_weights[j] = it->second;
    s.intercept = 3.5;
    s.label_noise = 0.02;
    return s;
}

DataConfig default_csv_schema() {
    DataConfig d;
    d.continuous = {"loan_amnt", "int_rate", "annual_inc", "dti", "revol_util", "open_acc"};
    d.categorical = {{"grade", {}}, {"term", {}}, {"home_ownership", {}}};
    d.label_column = "loan_status";
    d.label_rule = default_lending_club_rule();
    return d;
}

RunConfig parse_run_config(const Json& j) {
    RunConfig c;
    ObjectReader root(j, "");
    root.get("seed", c.seed);
    root.get("output_dir", c.output_dir);
    root.child("run");  // stamp left by a previous run; informational only

    if (const Json* d = root.child("data")) {
        ObjectReader r(*d, "data");
        r.get("source", c.data.source);
        r.get("path", c.data.path);
        r.get("sample_size", c.data.sample_size);
        r.get("holdout_fraction", c.data.holdout_fraction);
        if (const Json* s = r.child("schema")) read_schema(*s, c.data.schema);
        if (const Json* s = r.child("synthetic")) read_synthetic(*s, c.data.synthetic);
        r.finish();
    }

    if (const Json* m = root.child("models")) {
        ObjectReader r(*m, "models");
        if (const Json* enabled = r.child("enabled")) {
            c.models.clear();
            if (!enabled->is_array()) throw ConfigError("config: models.enabled must be a list");
            for (const auto& name : *enabled) c.models.push_back(parse_model_kind(name.get<std::string>()));
        }
        if (const Json* p = r.child("logistic")) {
            ObjectReader pr(*p, "models.logistic");
            pr.get("l2", c.logistic.l2);
            pr.get("max_iters", c.logistic.max_iters);
            pr.get("tol", c.logistic.tol);
            pr.get("max_weight_norm", c.logistic.max_weight_norm);
            pr.finish();
        }
        if (const Json* p = r.child("random_forest")) {
            ObjectReader pr(*p, "models.random_forest");
            pr.get("n_trees", c.forest.n_trees);
            pr.get("max_depth", c.forest.max_depth);
            pr.get("min_samples_leaf", c.forest.min_samples_leaf);
            pr.get("features_per_split", c.forest.features_per_split);
            pr.finish();
        }
        if (const Json* p = r.child("gradient_boosting")) {
            ObjectReader pr(*p, "models.gradient_boosting");
            pr.get("n_stages", c.boosting.n_stages);
            pr.get("learning_rate", c.boosting.learning_rate);
            pr.get("max_depth", c.boosting.max_depth);
            pr.get("min_samples_leaf", c.boosting.min_samples_leaf);
            pr.get("leaf_ridge", c.boosting.leaf_ridge);
            pr.finish();
        }
        if (const Json* p = r.child("mlp")) {
            ObjectReader pr(*p, "models.mlp");
            pr.get("widths", c.mlp.widths);
            pr.get("dropout_rate", c.mlp.dropout_rate);
            pr.get("epochs", c.mlp.epochs);
            pr.get("batch_size", c.mlp.batch_size);
            pr.get("learning_rate", c.mlp.learning_rate);
            pr.get("beta1", c.mlp.beta1);
            pr.get("beta2", c.mlp.beta2);
            pr.get("adam_epsilon", c.mlp.adam_epsilon);
            pr.get("bn_momentum", c.mlp.bn_momentum);
            pr.get("bn_epsilon", c.mlp.bn_epsilon);
            pr.finish();
        }
        r.finish();
    }

    if (const Json* e = root.child("explain")) {
        ObjectReader r(*e, "explain");
        auto& x = c.explain;
        r.get("techniques", x.techniques);
        r.get("instances", x.instances);
        r.get("background", x.background);
        r.get("permutation_repeats", x.permutation_repeats);
        r.get("shap_coalitions", x.shap_coalitions);
        r.get("lime_samples", x.lime_samples);
        r.get("lime_kernel_width", x.lime_kernel_width);
        r.get("lime_ridge", x.lime_ridge);
        r.get("gam_k", x.gam_k);
        r.get("gam_subsample", x.gam_subsample);
        r.get("gam_max_iters", x.gam_max_iters);
        r.finish();
    }

    if (const Json* p = root.child("perturbation")) {
        ObjectReader r(*p, "perturbation");
        c.perturbation.continuous_grid = read_grid(r, "continuous_grid", c.perturbation.continuous_grid);
        c.perturbation.categorical_grid = read_grid(r, "categorical_grid", c.perturbation.categorical_grid);
        r.get("repeats", c.perturbation.repeats);
        r.get("reversal_tolerance", c.perturbation.reversal_tolerance);
        r.get("features", c.perturb_features);
        r.finish();
    }

    if (const Json* k = root.child("consistency")) {
        ObjectReader r(*k, "consistency");
        r.get("k", c.consistency.k);
        r.get("flatness_threshold", c.consistency.flatness_threshold);
        r.get("consistent_rho", c.consistency.consistent_rho);
        r.get("partial_rho", c.consistency.partial_rho);
        r.finish();
    }
    root.finish();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_run_config(j);
}

Json to_json(const RunConfig& c) {
    Json continuous = Json::array();
    for (const auto& s : c.data.synthetic.continuous)
        continuous.push_back(
            {{"name", s.name}, {"distribution", distribution_name(s.distribution)}, {"a", s.a}, {"b", s.b}});
    Json groups = Json::array();
    for (const auto& g : c.data.synthetic.groups)
        groups.push_back({{"name", g.name}, {"levels", g.levels}, {"probabilities", g.probabilities}});
    Json weights = Json::object();
    const auto names = c.data.synthetic.schema().names();
    for (std::size_t i = 0; i < names.size() && i < c.data.synthetic.true_weights.size(); ++i)
        if (c.data.synthetic.true_weights[i] != 0.0) weights[names[i]] = c.data.synthetic.true_weights[i];
    Json categorical = Json::array();
    for (const auto& g : c.data.schema.categorical)
        categorical.push_back({{"name", g.name}, {"levels", g.levels}});

    Json enabled = Json::array();
    for (ModelKind k : c.models) enabled.push_back(std::string(to_string(k)));

    const auto& x = c.explain;
    return {
        {"seed", c.seed},
        {"data",
         {{"source", c.data.source},
          {"path", c.data.path},
          {"sample_size", c.data.sample_size},
          {"holdout_fraction", c.data.holdout_fraction},
          {"schema",
           {{"continuous", c.data.schema.continuous},
            {"categorical", categorical},
            {"label_column", c.data.schema.label_column},
            {"id_column", c.data.schema.id_column},
            {"good_statuses", c.data.schema.label_rule.good_statuses},
            {"bad_statuses", c.data.schema.label_rule.bad_statuses}}},
          {"synthetic",
           {{"n_rows", c.data.synthetic.n_rows},
            {"continuous", continuous},
            {"groups", groups},
            {"weights", weights},
            {"intercept", c.data.synthetic.intercept},
            {"label_noise", c.data.synthetic.label_noise}}}}},
        {"models",
         {{"enabled", enabled},
          {"logistic",
           {{"l2", c.logistic.l2},
            {"max_iters", c.logistic.max_iters},
            {"tol", c.logistic.tol},
            {"max_weight_norm", c.logistic.max_weight_norm}}},
          {"random_forest",
           {{"n_trees", c.forest.n_trees},
            {"max_depth", c.forest.max_depth},
            {"min_samples_leaf", c.forest.min_samples_leaf},
            {"features_per_split", c.forest.features_per_split}}},
          {"gradient_boosting",
           {{"n_stages", c.boosting.n_stages},
            {"learning_rate", c.boosting.learning_rate},
            {"max_depth", c.boosting.max_depth},
            {"min_samples_leaf", c.boosting.min_samples_leaf},
            {"leaf_ridge", c.boosting.leaf_ridge}}},
          {"mlp",
           {{"widths", c.mlp.widths},
            {"dropout_rate", c.mlp.dropout_rate},
            {"epochs", c.mlp.epochs},
            {"batch_size", c.mlp.batch_size},
            {"learning_rate", c.mlp.learning_rate},
            {"beta1", c.mlp.beta1},
            {"beta2", c.mlp.beta2},
            {"adam_epsilon", c.mlp.adam_epsilon},
            {"bn_momentum", c.mlp.bn_momentum},
            {"bn_epsilon", c.mlp.bn_epsilon}}}}},
        {"explain",
         {{"techniques", x.techniques},
          {"instances", x.instances},
          {"background", x.background},
          {"permutation_repeats", x.permutation_repeats},
          {"shap_coalitions", x.shap_coalitions},
          {"lime_samples", x.lime_samples},
          {"lime_kernel_width", x.lime_kernel_width},
          {"lime_ridge", x.lime_ridge},
          {"gam_k", x.gam_k},
          {"gam_subsample", x.gam_subsample},
          {"gam_max_iters", x.gam_max_iters}}},
        {"perturbation",
         {{"continuous_grid", c.perturbation.continuous_grid},
          {"categorical_grid", c.perturbation.categorical_grid},
          {"repeats", c.perturbation.repeats},
          {"reversal_tolerance", c.perturbation.reversal_tolerance},
          {"features", c.perturb_features}}},
        {"consistency",
         {{"k", c.consistency.k},
          {"flatness_threshold", c.consistency.flatness_threshold},
          {"consistent_rho", c.consistency.consistent_rho},
          {"partial_rho", c.consistency.partial_rho}}}};
}

std::string config_hash(const RunConfig& config) { return fnv1a_hex(io::canonical_dump(to_json(config))); }

void validate(const RunConfig& c) {
    if (c.data.source == "synthetic") {
        c.data.synthetic.validate();
        if (c.data.synthetic.n_rows == 0) throw ConfigError("config: data.synthetic.n_rows must be > 0");
    } else if (c.data.source == "csv") {
        if (c.data.path.empty()) throw ConfigError("config: data.path is required for a csv source");
        c.data.schema.label_rule.validate();
    } else {
        throw ConfigError("config: data.source must be 'synthetic' or 'csv'");
    }
    if (c.data.sample_size % 2 != 0) throw ConfigError("config: data.sample_size must be even");
    if (!(c.data.holdout_fraction > 0.0 && c.data.holdout_fraction < 1.0))
        throw ConfigError("config: data.holdout_fraction must lie in (0, 1)");
    if (c.models.empty()) throw ConfigError("no models enabled");
    std::set<ModelKind> unique(c.models.begin(), c.models.end());
    if (unique.size() != c.models.size()) throw ConfigError("config: a model is enabled twice");
    for (const auto& t : c.explain.techniques)
        if (std::find(kTechniques.begin(), kTechniques.end(), t) == kTechniques.end())
            throw ConfigError("config: unknown technique '" + t + "'");
    const auto& x = c.explain;
    if (x.instances < 2 || x.instances % 2 != 0) throw ConfigError("config: explain.instances must be even and >= 2");
    if (x.background < 2 || x.background % 2 != 0) throw ConfigError("config: explain.background must be even and >= 2");
    if (x.permutation_repeats == 0) throw ConfigError("config: explain.permutation_repeats must be >= 1");
    if (!(x.lime_ridge > 0.0)) throw ConfigError("config: explain.lime_ridge must be > 0");
    if (x.gam_k == 0) throw ConfigError("config: explain.gam_k must be >= 1");
    if (c.perturbation.repeats == 0) throw ConfigError("config: perturbation.repeats must be >= 1");
    if (c.consistency.k == 0) throw ConfigError("config: consistency.k must be >= 1");
}

std::uint64_t module_seed(const RunConfig& config, std::string_view module) {
    return derive_seed(config.seed, module);
}

}  // namespace xaudit::app
