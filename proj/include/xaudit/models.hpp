#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "xaudit/common.hpp"
#include "xaudit/dataset.hpp"
#include "xaudit/tree.hpp"

namespace xaudit {

/// The model-agnostic contract every explainer is written against:
/// rows in, P(good) out.
class ProbabilityModel {
public:
    virtual ~ProbabilityModel() = default;
    virtual std::size_t n_features() const = 0;
    virtual std::vector<double> predict_proba(const Matrix& rows) const = 0;

    double predict_one(std::span<const double> row) const;

protected:
    void check_width(const Matrix& rows) const;
};

/// Adapts an arbitrary function of one row.
class FunctionModel final : public ProbabilityModel {
public:
    using Fn = std::function<double(std::span<const double>)>;
    FunctionModel(std::size_t n_features, Fn fn) : n_features_(n_features), fn_(std::move(fn)) {}

    std::size_t n_features() const override { return n_features_; }
    std::vector<double> predict_proba(const Matrix& rows) const override;

private:
    std::size_t n_features_;
    Fn fn_;
};

/// Per-column affine transform z = (x - mean) * inv_scale. Zero-variance
/// columns get inv_scale 0, so they carry no signal into the model.
struct Standardizer {
    std::vector<double> means;
    std::vector<double> inv_scales;

    static Standardizer fit(const Matrix& rows);
    void apply(std::span<const double> row, std::span<double> out) const;
    Matrix apply(const Matrix& rows) const;
    std::size_t size() const { return means.size(); }
};

// ---------------------------------------------------------------------------

struct LogisticParams {
    double l2 = 1e-4;
    std::size_t max_iters = 100;
    double tol = 1e-8;
    double max_weight_norm = 1e3;  // cap applied under perfect separation
    std::uint64_t seed = 0;
};

struct LogisticModel {
    Standardizer standardizer;
    std::vector<double> weights;  // on standardized inputs
    double intercept = 0.0;

    std::size_t iterations = 0;
    bool converged = false;
    bool separation_capped = false;  // weight norm hit max_weight_norm
    bool separated = false;           // training rows perfectly separated
    double gradient_norm = 0.0;

    double decision(std::span<const double> row) const;
    double predict_proba(std::span<const double> row) const { return sigmoid(decision(row)); }
};

LogisticModel train_logistic(const Dataset& train, const LogisticParams& params = {});

/// Mean log-loss of a probability vector against 0/1 labels.
double log_loss(std::span<const double> probabilities, std::span<const int> labels);

// ---------------------------------------------------------------------------

struct ForestParams {
    std::size_t n_trees = 200;
    std::size_t max_depth = 12;
    std::size_t min_samples_leaf = 1;
    std::size_t features_per_split = 0;  // 0: floor(sqrt(n_features))
    std::uint64_t seed = 0;
};

struct ForestModel {
    std::size_t n_features = 0;
    std::vector<DecisionTree> trees;
    std::vector<std::uint64_t> tree_seeds;
    ForestParams params;

    double predict_proba(std::span<const double> row) const;
};

ForestModel train_random_forest(const Dataset& train, const ForestParams& params = {});

struct BoostingParams {
    std::size_t n_stages = 200;
    double learning_rate = 0.1;
    std::size_t max_depth = 3;
    std::size_t min_samples_leaf = 1;
    double leaf_ridge = 1e-6;
    std::uint64_t seed = 0;
};

struct BoostedModel {
    std::size_t n_features = 0;
    double initial_score = 0.0;
    double learning_rate = 0.1;
    std::vector<DecisionTree> stages;
    std::vector<double> training_loss;  // [0] is the constant model

    double score(std::span<const double> row) const;
    double predict_proba(std::span<const double> row) const { return sigmoid(score(row)); }
};

BoostedModel train_gradient_boosting(const Dataset& train, const BoostingParams& params = {});

// ---------------------------------------------------------------------------

struct MlpParams {
    std::vector<std::size_t> widths{128, 64, 32, 16};
    double dropout_rate = 0.2;
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-7;
    double bn_momentum = 0.9;
    double bn_epsilon = 1e-3;
    std::uint64_t seed = 0;
};

/// Dense -> BatchNorm -> ReLU -> Dropout, four times, then a sigmoid unit.
/// Trainable parameters live in one flat vector (see MlpLayout) so the
/// optimizer and the gradient checker can treat them uniformly.
struct MlpModel {
    Standardizer standardizer;
    std::vector<std::size_t> widths;
    std::vector<double> params;
    std::vector<std::vector<double>> running_mean;
    std::vector<std::vector<double>> running_var;
    double dropout_rate = 0.0;
    double bn_epsilon = 1e-3;
    std::vector<double> loss_curve;  // mean training loss per epoch

    std::size_t n_inputs() const { return standardizer.size(); }
    std::vector<double> predict_proba(const Matrix& rows) const;
    double predict_proba(std::span<const double> row) const;
};

/// Offsets into MlpModel::params.
struct MlpLayout {
    struct Hidden {
        std::size_t in, out, w, b, gamma, beta;
    };
    std::vector<Hidden> hidden;
    std::size_t out_in = 0, out_w = 0, out_b = 0, total = 0;

    static MlpLayout of(std::size_t n_inputs, std::span<const std::size_t> widths);
};

enum class NormMode { Batch, Running };

/// Mean cross-entropy on standardized inputs with dropout disabled; fills
/// `gradient` (size = params.size()) when non-null.
double mlp_loss(const MlpModel& model, const Matrix& standardized, std::span<const int> labels,
                NormMode mode, std::vector<double>* gradient);

/// Untrained network (epochs are ignored).
MlpModel init_mlp(std::size_t n_inputs, const MlpParams& params, const Standardizer& standardizer);
MlpModel train_mlp(const Dataset& train, const MlpParams& params = {});

// ---------------------------------------------------------------------------

enum class ModelKind { Logistic, RandomForest, GradientBoosting, Mlp };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
inline constexpr ModelKind kAllModelKinds[] = {ModelKind::Logistic, ModelKind::RandomForest,
                                               ModelKind::GradientBoosting, ModelKind::Mlp};

class TrainedModel final : public ProbabilityModel {
public:
    using Variant = std::variant<LogisticModel, ForestModel, BoostedModel, MlpModel>;

    TrainedModel(Variant model, std::string schema_hash);

    ModelKind kind() const;
    const Variant& model() const { return model_; }
    const std::string& schema_hash() const { return schema_hash_; }

    template <typename T>
    const T* as() const {
        return std::get_if<T>(&model_);
    }

    std::size_t n_features() const override;
    std::vector<double> predict_proba(const Matrix& rows) const override;

private:
    Variant model_;
    std::string schema_hash_;
    std::vector<CompactTree> compact_;  // tree ensembles only
};

struct Confusion {
    std::size_t true_good = 0;  // predicted 1, label 1
    std::size_t true_bad = 0;   // predicted 0, label 0
    std::size_t false_good = 0;
    std::size_t false_bad = 0;
    double accuracy = 0.0;
};

/// Decision rule: P(good) >= 0.5 -> good.
Confusion evaluate_accuracy(const ProbabilityModel& model, const Dataset& holdout);

}  // namespace xaudit
