#include <fstream>
#include <iostream>
#include <sstream>

#include "xaudit/app.hpp"
#include "xaudit/csv.hpp"
#include "xaudit/parallel.hpp"

namespace xaudit::app {

namespace fs = std::filesystem;
using io::Json;

namespace {

std::string model_name(ModelKind k) { return std::string(to_string(k)); }

bool has_technique(const RunConfig& c, std::string_view t) {
    return std::find(c.explain.techniques.begin(), c.explain.techniques.end(), t) !=
           c.explain.techniques.end();
}

bool is_tree_model(ModelKind k) { return k == ModelKind::RandomForest || k == ModelKind::GradientBoosting; }

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string join(const std::vector<double>& values, char sep) {
    std::string out;
    for (double v : values) out += (out.empty() ? "" : std::string(1, sep)) + csv::format_double(v);
    return out;
}

SensitivityScore score_from_json(const Json& j) {
    SensitivityScore s;
    s.feature = j.at("feature").get<std::string>();
    s.score = j.at("score").get<double>();
    s.monotone = j.at("monotone").get<bool>();
    s.reversal_points = j.at("reversal_points").get<std::vector<double>>();
    return s;
}

}  // namespace

void Logger::info(const std::string& message) const {
    if (!quiet_) std::cerr << "xaudit: " << message << "\n";
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const DataError*>(&e)) return 2;
    if (dynamic_cast<const NumericError*>(&e)) return 3;
    return 1;
}

// ---------------------------------------------------------------------------

PreparedData prepare_data(const RunConfig& config) {
    PreparedData out;
    Dataset all;
    if (config.data.source == "synthetic") {
        all = generate_synthetic(config.data.synthetic, module_seed(config, "synthetic")).data;
        out.report.raw_rows = out.report.kept = all.size();
        out.input_hash = "synthetic";
    } else {
        const std::string bytes = read_file(config.data.path);
        out.input_hash = fnv1a_hex(bytes);
        std::istringstream in(bytes);
        auto loaded = load_csv(in, config.data.schema);
        all = std::move(loaded.data);
        out.report = loaded.report;
    }
    if (config.data.sample_size > 0)
        all = balanced_sample(all, config.data.sample_size, module_seed(config, "sample"));
    auto split = train_holdout_split(all, config.data.holdout_fraction, module_seed(config, "split"));
    out.train = std::move(split.train);
    out.holdout = std::move(split.holdout);
    return out;
}

// ---------------------------------------------------------------------------

Run::Run(RunConfig config, Logger log)
    : config_(std::move(config)), hash_(config_hash(config_)), log_(log) {}

Json Run::stamp() const { return {{"config_hash", hash_}, {"seed", config_.seed}}; }

void Run::write_text(const fs::path& relative, const std::string& text) const {
    const fs::path path = out() / relative;
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << text;
    if (!f) throw DataError("write failed: " + path.string());
}

void Run::write_json(const fs::path& relative, Json body) const {
    body["run"] = stamp();
    write_text(relative, io::canonical_dump(body));
}

void Run::write_csv(const fs::path& relative, const std::string& csv_text) const {
    std::istringstream in(csv_text);
    std::ostringstream out;
    std::vector<std::string> record;
    bool header = true;
    while (csv::read_record(in, record)) {
        if (header) {
            record.insert(record.end(), {"config_hash", "seed"});
            header = false;
        } else {
            record.insert(record.end(), {hash_, std::to_string(config_.seed)});
        }
        csv::write_record(out, record);
    }
    write_text(relative, out.str());
}

Json Run::read_json(const fs::path& relative) const {
    const fs::path path = out() / relative;
    const std::string text = read_file(path);
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + " is not valid JSON: " + e.what());
    }
}

void Run::write_run_config(const PreparedData& data) const {
    write_json("run_config.json", {{"config", to_json(config_)}, {"input_hash", data.input_hash}});
    Json report = io::to_json(data.report);
    report["train_rows"] = data.train.size();
    report["holdout_rows"] = data.holdout.size();
    write_json("data_report.json", report);
}

// ---------------------------------------------------------------------------

Dataset Run::gen_synth() {
    if (config_.data.source != "synthetic") throw ConfigError("gen-synth needs data.source = synthetic");
    config_.data.synthetic.validate();
    const auto data = generate_synthetic(config_.data.synthetic, module_seed(config_, "synthetic")).data;
    std::ostringstream text;
    xaudit::write_csv(data, text, "Fully Paid", "Charged Off", "id");
    write_csv("synthetic.csv", text.str());

    // A config that trains on the file just written through the CSV path.
    RunConfig reload = config_;
    reload.data.source = "csv";
    reload.data.path = (fs::absolute(out()) / "synthetic.csv").lexically_normal().string();
    reload.data.schema.continuous.clear();
    reload.data.schema.categorical.clear();
    for (const auto& f : data.schema().features())
        if (f.kind == FeatureKind::Continuous) reload.data.schema.continuous.push_back(f.name);
    for (const auto& g : data.schema().groups()) reload.data.schema.categorical.push_back({g.name, g.levels});
    reload.data.schema.label_column = data.schema().label_column();
    reload.data.schema.id_column = "id";
    reload.data.schema.label_rule = default_lending_club_rule();
    write_json("synthetic_config.json", to_json(reload));
    log_.info("wrote " + std::to_string(data.size()) + " synthetic rows to " + (out() / "synthetic.csv").string());
    return data;
}

std::vector<NamedModel> Run::train(const PreparedData& data) {
    validate(config_);
    std::vector<NamedModel> models;
    std::ostringstream acc;
    csv::write_record(acc, {"model", "accuracy", "true_good", "true_bad", "false_good", "false_bad", "holdout_rows"});
    const std::string schema_hash = data.train.schema().hash();
    for (ModelKind kind : config_.models) {
        const std::uint64_t seed = module_seed(config_, to_string(kind));
        log_.info("training " + model_name(kind) + " on " + std::to_string(data.train.size()) + " rows");
        TrainedModel::Variant fitted;
        switch (kind) {
            case ModelKind::Logistic: {
                auto p = config_.logistic;
                p.seed = seed;
                auto m = train_logistic(data.train, p);
                if (m.separated) log_.info("logistic: training data is perfectly separated");
                fitted = std::move(m);
                break;
            }
            case ModelKind::RandomForest: {
                auto p = config_.forest;
                p.seed = seed;
                fitted = train_random_forest(data.train, p);
                break;
            }
            case ModelKind::GradientBoosting: {
                auto p = config_.boosting;
                p.seed = seed;
                fitted = train_gradient_boosting(data.train, p);
                break;
            }
            case ModelKind::Mlp: {
                auto p = config_.mlp;
                p.seed = seed;
                fitted = train_mlp(data.train, p);
                break;
            }
        }
        TrainedModel model(std::move(fitted), schema_hash);
        const Confusion c = evaluate_accuracy(model, data.holdout);
        csv::write_record(acc, {model_name(kind), csv::format_double(c.accuracy), std::to_string(c.true_good),
                                std::to_string(c.true_bad), std::to_string(c.false_good),
                                std::to_string(c.false_bad), std::to_string(data.holdout.size())});
        log_.info(model_name(kind) + " holdout accuracy " + csv::format_double(c.accuracy));
        write_json(fs::path("models") / (model_name(kind) + ".json"), io::model_to_json(model));
        models.push_back({kind, std::move(model)});
    }
    write_csv("accuracy.csv", acc.str());
    return models;
}

std::vector<NamedModel> Run::load_models(const PreparedData& data) const {
    validate(config_);
    std::vector<NamedModel> models;
    for (ModelKind kind : config_.models) {
        const fs::path rel = fs::path("models") / (model_name(kind) + ".json");
        if (!fs::exists(out() / rel))
            throw DataError("no trained model at " + (out() / rel).string() + ": run train first");
        models.push_back({kind, io::model_from_json(read_json(rel), data.train.schema().hash())});
    }
    return models;
}

StaticResult Run::explain(const PreparedData& data, const std::vector<NamedModel>& models) {
    validate(config_);
    const auto& x = config_.explain;
    const FeatureSchema& schema = data.train.schema();
    StaticResult result;

    const bool want_lime = has_technique(config_, "lime");
    const bool want_shap = has_technique(config_, "shap");
    const bool want_gam = has_technique(config_, "gam");
    Dataset instances;
    Matrix background;
    if (want_lime || want_shap || want_gam) {
        instances = balanced_sample(data.train, x.instances, module_seed(config_, "instances"));
        background = balanced_sample(data.train, x.background, module_seed(config_, "background")).rows();
    }
    const std::optional<LimeStats> stats = want_lime ? std::optional(LimeStats::fit(data.train)) : std::nullopt;
    auto skip = [&](const std::string& note) {
        log_.info(note);
        result.skipped.push_back(note);
    };

    for (const auto& [kind, model] : models) {
        const std::string name = model_name(kind);
        if (has_technique(config_, "impurity")) {
            if (is_tree_model(kind))
                result.rankings.push_back(impurity_importance(model, schema));
            else
                skip("impurity importance skipped for " + name + ": model has no trees");
        }
        if (has_technique(config_, "logit_coefficient") && kind == ModelKind::Logistic)
            result.rankings.push_back(logit_coefficient_importance(model, schema));
        if (has_technique(config_, "permutation")) {
            log_.info(name + ": permutation importance");
            result.rankings.push_back(permutation_importance(model, data.train, x.permutation_repeats,
                                                             module_seed(config_, "permutation"), name));
        }
        const auto& ids = instances.row_ids();
        if (want_lime) {
            log_.info(name + ": lime over " + std::to_string(ids.size()) + " instances");
            std::vector<Attribution> attrs(ids.size());
            const std::uint64_t base = module_seed(config_, "lime");
            parallel_for(ids.size(), [&](std::size_t i) {
                LimeParams p;
                p.n_samples = x.lime_samples;
                p.kernel_width = x.lime_kernel_width;
                p.ridge = x.lime_ridge;
                p.seed = derive_seed(base, ids[i]);
                attrs[i] = lime_explain(model, schema, instances.rows().row(i), *stats, p, ids[i]);
            });
            result.rankings.push_back(global_importance_from_attributions(attrs, "lime", name));
            std::ostringstream text;
            io::write_attributions_csv(attrs, name, text);
            write_csv(fs::path("attributions") / (name + "_lime.csv"), text.str());
        }
        if (want_shap || want_gam) {
            log_.info(name + ": kernel shap over " + std::to_string(ids.size()) + " instances");
            std::vector<Attribution> attrs(ids.size());
            const std::uint64_t base = module_seed(config_, "shap");
            parallel_for(ids.size(), [&](std::size_t i) {
                KernelShapParams p;
                p.n_coalitions = x.shap_coalitions;
                p.seed = derive_seed(base, ids[i]);
                attrs[i] = kernel_shap(model, schema, instances.rows().row(i), background, p, ids[i]);
            });
            if (want_shap) {
                result.rankings.push_back(global_importance_from_attributions(attrs, "shap", name));
                std::ostringstream text;
                io::write_attributions_csv(attrs, name, text);
                write_csv(fs::path("attributions") / (name + "_shap.csv"), text.str());
            }
            if (want_gam) {
                const std::uint64_t seed = module_seed(config_, "gam");
                const LabelGam by_label = gam_by_label(attrs, instances.labels(), x.gam_subsample, seed, name);
                const GamResult clusters =
                    gam_cluster(attrs, std::min(x.gam_k, attrs.size()), x.gam_max_iters, seed);
                result.rankings.push_back(by_label.good);
                result.rankings.push_back(by_label.bad);
                write_json(fs::path("gam") / (name + ".json"),
                           {{"model", name},
                            {"label_forced", io::to_json(by_label.result)},
                            {"unsupervised", io::to_json(clusters)}});
            }
        }
    }

    Json rankings = Json::array();
    for (const auto& r : result.rankings) rankings.push_back(io::to_json(r));
    write_json("rankings.json", {{"rankings", rankings}, {"skipped", result.skipped}});
    std::ostringstream text;
    io::write_rankings_csv(result.rankings, text);
    write_csv("rankings.csv", text.str());
    return result;
}

DynamicOutputs Run::perturb(const PreparedData& data, const std::vector<NamedModel>& models) {
    validate(config_);
    const FeatureSchema& schema = data.holdout.schema();
    DynamicOutputs out;
    std::vector<std::string> features = config_.perturb_features;
    if (features.empty()) features = schema.names();
    std::vector<std::string> kept;
    for (const auto& f : features) {
        const std::size_t col = schema.require_index(f);
        if (schema.feature(col).kind == FeatureKind::CategoricalLevel) {
            bool present = false;
            for (std::size_t i = 0; i < data.holdout.size() && !present; ++i)
                present = data.holdout.rows()(i, col) == 1.0;
            if (!present) {
                const std::string note = "perturbation skipped for " + f + ": level absent from holdout";
                log_.info(note);
                out.skipped.push_back(note);
                continue;
            }
        }
        kept.push_back(f);
    }

    PerturbationConfig pc = config_.perturbation;
    pc.seed = module_seed(config_, "perturbation");
    std::ostringstream curves_csv, scores_csv;
    std::vector<PerturbationCurve> all_curves;
    csv::write_record(scores_csv, {"model", "feature", "score", "monotone", "reversal_points"});
    for (const auto& [kind, model] : models) {
        const std::string name = model_name(kind);
        log_.info(name + ": perturbing " + std::to_string(kept.size()) + " features");
        DynamicResult r = dynamic_importance(model, data.holdout, kept, pc, name);
        Json curves = Json::array(), scores = Json::array();
        for (const auto& c : r.curves) curves.push_back(io::to_json(c));
        for (const auto& s : r.scores) {
            scores.push_back(io::to_json(s));
            csv::write_record(scores_csv, {name, s.feature, csv::format_double(s.score),
                                           s.monotone ? "true" : "false", join(s.reversal_points, ';')});
        }
        all_curves.insert(all_curves.end(), r.curves.begin(), r.curves.end());
        write_json(fs::path("dynamic") / (name + ".json"), {{"model", name},
                                                             {"ranking", io::to_json(r.ranking)},
                                                             {"scores", scores},
                                                             {"curves", curves},
                                                             {"skipped", out.skipped}});
        out.results.push_back(std::move(r));
    }
    io::write_curves_csv(all_curves, curves_csv);
    write_csv("curves.csv", curves_csv.str());
    write_csv("sensitivity.csv", scores_csv.str());
    return out;
}

ConsistencyReport Run::report(const PreparedData& data, const StaticResult& statics,
                              const DynamicOutputs& dynamic) {
    ConsistencyReport report =
        build_consistency_report(statics.rankings, dynamic.results, data.train.schema(), config_.consistency);
    write_json("consistency_report.json", io::to_json(report));
    write_text("consistency_report.md", consistency_markdown(report) + "\n---\nconfig hash " + hash_ +
                                            ", seed " + std::to_string(config_.seed) + "\n");
    for (const auto& v : report.verdicts) log_.info(v);
    return report;
}

ConsistencyReport Run::report_from_disk(const PreparedData& data) {
    validate(config_);
    StaticResult statics;
    const Json rankings = read_json("rankings.json");
    for (const auto& r : rankings.at("rankings")) statics.rankings.push_back(io::ranking_from_json(r));
    DynamicOutputs dynamic;
    for (ModelKind kind : config_.models) {
        const fs::path rel = fs::path("dynamic") / (model_name(kind) + ".json");
        if (!fs::exists(out() / rel)) throw DataError("missing " + (out() / rel).string() + ": run perturb first");
        const Json j = read_json(rel);
        DynamicResult r;
        r.ranking = io::ranking_from_json(j.at("ranking"));
        for (const auto& s : j.at("scores")) r.scores.push_back(score_from_json(s));
        dynamic.results.push_back(std::move(r));
    }
    return report(data, statics, dynamic);
}

ConsistencyReport Run::audit() {
    validate(config_);
    const PreparedData data = prepare_data(config_);
    write_run_config(data);
    const auto models = train(data);
    const auto statics = explain(data, models);
    const auto dynamic = perturb(data, models);
    return report(data, statics, dynamic);
}

}  // namespace xaudit::app
