#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "xaudit/models.hpp"

namespace xaudit {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using ConstVec = Eigen::Map<const Eigen::RowVectorXd>;

// Activations kept for the backward pass.
struct Trace {
    std::vector<RowMat> input;  // input to each dense layer
    std::vector<RowMat> xhat;
    std::vector<Eigen::RowVectorXd> inv_std;
    std::vector<RowMat> normed;  // BN output, pre-ReLU
    std::vector<RowMat> mask;    // dropout scale per unit (empty: none)
    RowMat last;
    Eigen::VectorXd logits;
};

struct BatchStats {
    std::vector<Eigen::RowVectorXd> mean;
    std::vector<Eigen::RowVectorXd> var;
};

RowMat to_eigen(const Matrix& m) {
    RowMat out(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
    if (m.rows() > 0)
        std::copy(m.data().begin(), m.data().end(), out.data());
    return out;
}

void forward(const MlpModel& model, const MlpLayout& layout, const RowMat& x, NormMode mode,
             Rng* dropout_rng, Trace& trace, BatchStats* stats) {
    const std::size_t layers = layout.hidden.size();
    trace = Trace{};
    trace.input.reserve(layers);
    const double* p = model.params.data();
    const Eigen::Index n = x.rows();
    RowMat h = x;
    for (std::size_t l = 0; l < layers; ++l) {
        const auto& L = layout.hidden[l];
        const auto in = static_cast<Eigen::Index>(L.in), out = static_cast<Eigen::Index>(L.out);
        ConstMap w(p + L.w, in, out);
        ConstVec b(p + L.b, out), gamma(p + L.gamma, out), beta(p + L.beta, out);

        RowMat a = h * w;
        a.rowwise() += b;
        Eigen::RowVectorXd mu, var;
        if (mode == NormMode::Batch) {
            mu = a.colwise().mean();
            var = (a.rowwise() - mu).array().square().colwise().mean();
        } else {
            mu = ConstVec(model.running_mean[l].data(), out);
            var = ConstVec(model.running_var[l].data(), out);
        }
        Eigen::RowVectorXd inv_std = (var.array() + model.bn_epsilon).rsqrt();
        RowMat xhat = (a.rowwise() - mu).array().rowwise() * inv_std.array();
        RowMat y = (xhat.array().rowwise() * gamma.array()).rowwise() + beta.array();

        RowMat mask;
        RowMat act = y.cwiseMax(0.0);
        if (dropout_rng && model.dropout_rate > 0.0) {
            std::bernoulli_distribution keep(1.0 - model.dropout_rate);
            const double scale = 1.0 / (1.0 - model.dropout_rate);
            mask.resize(n, out);
            for (Eigen::Index i = 0; i < mask.size(); ++i)
                mask.data()[i] = keep(*dropout_rng) ? scale : 0.0;
            act = act.cwiseProduct(mask);
        }

        if (stats) {
            stats->mean.push_back(mu);
            stats->var.push_back(var);
        }
        trace.input.push_back(std::move(h));
        trace.xhat.push_back(std::move(xhat));
        trace.inv_std.push_back(std::move(inv_std));
        trace.normed.push_back(std::move(y));
        trace.mask.push_back(std::move(mask));
        h = std::move(act);
    }
    ConstMap w_out(p + layout.out_w, static_cast<Eigen::Index>(layout.out_in), 1);
    trace.logits = (h * w_out).col(0).array() + p[layout.out_b];
    trace.last = std::move(h);
}

double mean_cross_entropy(const Eigen::VectorXd& z, std::span<const int> labels) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double zi = z[i];
        const double softplus = zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
        total += softplus - labels[static_cast<std::size_t>(i)] * zi;
    }
    return total / static_cast<double>(z.size());
}

void backward(const MlpModel& model, const MlpLayout& layout, const Trace& trace,
              std::span<const int> labels, NormMode mode, std::vector<double>& grad) {
    grad.assign(model.params.size(), 0.0);
    const double* p = model.params.data();
    const Eigen::Index n = trace.logits.size();
    const double dn = static_cast<double>(n);

    Eigen::VectorXd dz(n);
    for (Eigen::Index i = 0; i < n; ++i)
        dz[i] = (1.0 / (1.0 + std::exp(-trace.logits[i])) - labels[static_cast<std::size_t>(i)]) / dn;

    const auto last_w = static_cast<Eigen::Index>(layout.out_in);
    Eigen::Map<Eigen::VectorXd>(grad.data() + layout.out_w, last_w) = trace.last.transpose() * dz;
    grad[layout.out_b] = dz.sum();
    RowMat dh = dz * ConstVec(p + layout.out_w, last_w);

    for (std::size_t l = layout.hidden.size(); l-- > 0;) {
        const auto& L = layout.hidden[l];
        const auto in = static_cast<Eigen::Index>(L.in), out = static_cast<Eigen::Index>(L.out);
        if (trace.mask[l].size() > 0) dh = dh.cwiseProduct(trace.mask[l]);
        RowMat dy = dh.array() * (trace.normed[l].array() > 0.0).cast<double>();

        Eigen::Map<Eigen::RowVectorXd>(grad.data() + L.gamma, out) =
            dy.cwiseProduct(trace.xhat[l]).colwise().sum();
        Eigen::Map<Eigen::RowVectorXd>(grad.data() + L.beta, out) = dy.colwise().sum();

        RowMat dxhat = dy.array().rowwise() * ConstVec(p + L.gamma, out).array();
        RowMat da;
        if (mode == NormMode::Batch) {
            const Eigen::RowVectorXd s1 = dxhat.colwise().sum();
            const Eigen::RowVectorXd s2 = dxhat.cwiseProduct(trace.xhat[l]).colwise().sum();
            RowMat centered = (dxhat * dn).rowwise() - s1;
            centered -= (trace.xhat[l].array().rowwise() * s2.array()).matrix();
            da = (centered.array().rowwise() * trace.inv_std[l].array()).matrix() / dn;
        } else {
            da = dxhat.array().rowwise() * trace.inv_std[l].array();
        }
        Eigen::Map<RowMat>(grad.data() + L.w, in, out) = trace.input[l].transpose() * da;
        Eigen::Map<Eigen::RowVectorXd>(grad.data() + L.b, out) = da.colwise().sum();
        if (l > 0) dh = da * ConstMap(p + L.w, in, out).transpose();
    }
}

}  // namespace

MlpLayout MlpLayout::of(std::size_t n_inputs, std::span<const std::size_t> widths) {
    MlpLayout layout;
    std::size_t offset = 0;
    std::size_t in = n_inputs;
    for (std::size_t w : widths) {
        Hidden h{in, w, 0, 0, 0, 0};
        h.w = offset;
        offset += in * w;
        h.b = offset;
        offset += w;
        h.gamma = offset;
        offset += w;
        h.beta = offset;
        offset += w;
        layout.hidden.push_back(h);
        in = w;
    }
    layout.out_in = in;
    layout.out_w = offset;
    offset += in;
    layout.out_b = offset;
    offset += 1;
    layout.total = offset;
    return layout;
}

double mlp_loss(const MlpModel& model, const Matrix& standardized, std::span<const int> labels,
                NormMode mode, std::vector<double>* gradient) {
    const MlpLayout layout = MlpLayout::of(model.n_inputs(), model.widths);
    Trace trace;
    forward(model, layout, to_eigen(standardized), mode, nullptr, trace, nullptr);
    const double loss = mean_cross_entropy(trace.logits, labels);
    if (gradient) backward(model, layout, trace, labels, mode, *gradient);
    return loss;
}

std::vector<double> MlpModel::predict_proba(const Matrix& rows) const {
    const MlpLayout layout = MlpLayout::of(n_inputs(), widths);
    std::vector<double> out(rows.rows());
    constexpr std::size_t kChunk = 4096;
    Trace trace;
    for (std::size_t start = 0; start < rows.rows(); start += kChunk) {
        const std::size_t end = std::min(rows.rows(), start + kChunk);
        RowMat x(static_cast<Eigen::Index>(end - start), static_cast<Eigen::Index>(n_inputs()));
        for (std::size_t i = start; i < end; ++i)
            standardizer.apply(rows.row(i),
                               {x.data() + (i - start) * n_inputs(), n_inputs()});
        forward(*this, layout, x, NormMode::Running, nullptr, trace, nullptr);
        for (std::size_t i = start; i < end; ++i)
            out[i] = sigmoid(trace.logits[static_cast<Eigen::Index>(i - start)]);
    }
    return out;
}

double MlpModel::predict_proba(std::span<const double> row) const {
    Matrix m(1, row.size());
    std::copy(row.begin(), row.end(), m.row(0).begin());
    return predict_proba(m)[0];
}

MlpModel init_mlp(std::size_t n_inputs, const MlpParams& params, const Standardizer& standardizer) {
    if (params.widths.size() != 4) throw ConfigError("mlp: exactly four hidden layer widths required");
    for (std::size_t w : params.widths)
        if (w == 0) throw ConfigError("mlp: layer widths must be >= 1");
    if (!(params.dropout_rate >= 0.0 && params.dropout_rate < 1.0))
        throw ConfigError("mlp: dropout rate must lie in [0, 1)");

    MlpModel model;
    model.standardizer = standardizer;
    model.widths = params.widths;
    model.dropout_rate = params.dropout_rate;
    model.bn_epsilon = params.bn_epsilon;
    const MlpLayout layout = MlpLayout::of(n_inputs, model.widths);
    model.params.assign(layout.total, 0.0);

    // Glorot-uniform weights, zero biases, identity batch-norm.
    Rng rng(derive_seed(params.seed, "mlp-init"));
    auto glorot = [&](std::size_t offset, std::size_t in, std::size_t out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (std::size_t k = 0; k < in * out; ++k) model.params[offset + k] = dist(rng);
    };
    for (const auto& h : layout.hidden) {
        glorot(h.w, h.in, h.out);
        std::fill_n(model.params.begin() + static_cast<std::ptrdiff_t>(h.gamma), h.out, 1.0);
        model.running_mean.emplace_back(h.out, 0.0);
        model.running_var.emplace_back(h.out, 1.0);
    }
    glorot(layout.out_w, layout.out_in, 1);
    return model;
}

MlpModel train_mlp(const Dataset& train, const MlpParams& params) {
    if (train.size() == 0) throw DataError("mlp: training set is empty");
    if (params.batch_size == 0) throw ConfigError("mlp: batch size must be >= 1");
    MlpModel model = init_mlp(train.n_features(), params, Standardizer::fit(train.rows()));
    if (params.epochs == 0) return model;

    const MlpLayout layout = MlpLayout::of(model.n_inputs(), model.widths);
    const RowMat all = to_eigen(model.standardizer.apply(train.rows()));
    const auto& labels = train.labels();
    const std::size_t n = train.size();

    std::vector<double> m1(model.params.size(), 0.0), m2(model.params.size(), 0.0);
    std::vector<double> grad;
    std::size_t step = 0;
    Rng rng(derive_seed(params.seed, "mlp-train"));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Trace trace;
    BatchStats stats;

    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += params.batch_size) {
            const std::size_t end = std::min(n, start + params.batch_size);
            if (end - start < 2 && n >= 2) continue;  // batch statistics need two rows
            RowMat x(static_cast<Eigen::Index>(end - start), all.cols());
            std::vector<int> y(end - start);
            for (std::size_t k = start; k < end; ++k) {
                x.row(static_cast<Eigen::Index>(k - start)) = all.row(static_cast<Eigen::Index>(order[k]));
                y[k - start] = labels[order[k]];
            }
            stats = BatchStats{};
            forward(model, layout, x, NormMode::Batch, &rng, trace, &stats);
            const double loss = mean_cross_entropy(trace.logits, y);
            if (!std::isfinite(loss))
                throw NumericError("mlp: training diverged at epoch " + std::to_string(epoch + 1));
            epoch_loss += loss * static_cast<double>(end - start);
            backward(model, layout, trace, y, NormMode::Batch, grad);

            ++step;
            const double c1 = 1.0 - std::pow(params.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(params.beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < model.params.size(); ++k) {
                m1[k] = params.beta1 * m1[k] + (1.0 - params.beta1) * grad[k];
                m2[k] = params.beta2 * m2[k] + (1.0 - params.beta2) * grad[k] * grad[k];
                model.params[k] -= params.learning_rate * (m1[k] / c1) /
                                   (std::sqrt(m2[k] / c2) + params.adam_epsilon);
            }
            for (std::size_t l = 0; l < layout.hidden.size(); ++l)
                for (std::size_t u = 0; u < layout.hidden[l].out; ++u) {
                    const auto ui = static_cast<Eigen::Index>(u);
                    model.running_mean[l][u] = params.bn_momentum * model.running_mean[l][u] +
                                               (1.0 - params.bn_momentum) * stats.mean[l][ui];
                    model.running_var[l][u] = params.bn_momentum * model.running_var[l][u] +
                                              (1.0 - params.bn_momentum) * stats.var[l][ui];
                }
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss))
            throw NumericError("mlp: training diverged at epoch " + std::to_string(epoch + 1));
        model.loss_curve.push_back(epoch_loss);
    }
    return model;
}

}  // namespace xaudit
