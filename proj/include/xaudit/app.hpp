#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xaudit/consistency.hpp"
#include "xaudit/dataset.hpp"
#include "xaudit/explainers.hpp"
#include "xaudit/models.hpp"
#include "xaudit/perturbation.hpp"
#include "xaudit/serialize.hpp"

namespace xaudit::app {

/// Lending-Club-like synthetic population used when a config names none.
SyntheticSpec default_synthetic_spec();
/// Public Lending Club column layout and loan_status vocabulary.
DataConfig default_csv_schema();

struct DataSource {
    std::string source = "synthetic";  // "synthetic" or "csv"
    std::string path;                  // csv only
    DataConfig schema = default_csv_schema();  // csv only
    SyntheticSpec synthetic = default_synthetic_spec();
    std::size_t sample_size = 20000;   // 0: keep every row
    double holdout_fraction = 0.2;
};

struct ExplainConfig {
    std::vector<std::string> techniques{"impurity", "permutation", "lime", "shap", "logit_coefficient", "gam"};
    std::size_t instances = 40;   // explained rows, class-balanced from train
    std::size_t background = 100; // SHAP background rows, class-balanced from train
    std::size_t permutation_repeats = 5;
    std::size_t shap_coalitions = 2048;  // 0: full enumeration
    std::size_t lime_samples = 2000;
    double lime_kernel_width = 0.0;
    double lime_ridge = 1e-3;
    std::size_t gam_k = 2;
    std::size_t gam_subsample = 1000;  // per class
    std::size_t gam_max_iters = 100;
};

/// Everything a run depends on besides the input file bytes. Per-module
/// seeds are not configurable: they all derive from `seed`.
struct RunConfig {
    std::uint64_t seed = 42;
    DataSource data;
    std::vector<ModelKind> models{std::begin(kAllModelKinds), std::end(kAllModelKinds)};
    LogisticParams logistic;
    ForestParams forest;
    BoostingParams boosting;
    MlpParams mlp;
    ExplainConfig explain;
    PerturbationConfig perturbation;
    std::vector<std::string> perturb_features;  // empty: every schema column
    ConsistencyConfig consistency;
    std::string output_dir = "xaudit_out";
};

inline const std::vector<std::string> kTechniques{"impurity", "permutation", "lime", "shap",
                                                   "logit_coefficient", "gam"};

/// Strict: unknown keys and ill-typed values are ConfigErrors.
RunConfig parse_run_config(const io::Json& j);
RunConfig load_run_config(const std::filesystem::path& path);
/// Fully expanded config, output_dir excluded (it does not affect results).
io::Json to_json(const RunConfig& config);
std::string config_hash(const RunConfig& config);
void validate(const RunConfig& config);

std::uint64_t module_seed(const RunConfig& config, std::string_view module);

class Logger {
public:
    explicit Logger(bool quiet = false) : quiet_(quiet) {}
    void info(const std::string& message) const;

private:
    bool quiet_;
};

struct PreparedData {
    Dataset train;
    Dataset holdout;
    LoadReport report;
    std::string input_hash;  // of the CSV bytes, or "synthetic"
};

PreparedData prepare_data(const RunConfig& config);

struct NamedModel {
    ModelKind kind;
    TrainedModel model;
};

struct StaticResult {
    std::vector<ImportanceRanking> rankings;
    std::vector<std::string> skipped;
};

struct DynamicOutputs {
    std::vector<DynamicResult> results;  // one per model, model order
    std::vector<std::string> skipped;
};

/// Shared state of one CLI invocation: config, hash, output root, logging.
class Run {
public:
    Run(RunConfig config, Logger log);

    const RunConfig& config() const { return config_; }
    const std::string& hash() const { return hash_; }
    const Logger& log() const { return log_; }
    std::filesystem::path out() const { return config_.output_dir; }

    /// {config_hash, seed} stamped into every JSON output.
    io::Json stamp() const;
    void write_json(const std::filesystem::path& relative, io::Json body) const;
    /// Appends config_hash and seed columns to every record.
    void write_csv(const std::filesystem::path& relative, const std::string& csv_text) const;
    void write_text(const std::filesystem::path& relative, const std::string& text) const;
    io::Json read_json(const std::filesystem::path& relative) const;

    // Pipeline stages. Each writes its own outputs and returns what the next
    // stage needs.
    Dataset gen_synth();
    std::vector<NamedModel> train(const PreparedData& data);
    std::vector<NamedModel> load_models(const PreparedData& data) const;
    StaticResult explain(const PreparedData& data, const std::vector<NamedModel>& models);
    DynamicOutputs perturb(const PreparedData& data, const std::vector<NamedModel>& models);
    ConsistencyReport report(const PreparedData& data, const StaticResult& statics,
                             const DynamicOutputs& dynamic);
    /// Rebuilds the report from explain and perturb outputs on disk.
    ConsistencyReport report_from_disk(const PreparedData& data);
    ConsistencyReport audit();

    void write_run_config(const PreparedData& data) const;

private:
    RunConfig config_;
    std::string hash_;
    Logger log_;
};

/// Maps an exception to the documented exit code (1 config, 2 data, 3 numeric).
int exit_code_for(const std::exception& e);

}  // namespace xaudit::app
