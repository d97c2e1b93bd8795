#include <Eigen/Dense>
#include <cmath>

#include "xaudit/explainers.hpp"

namespace xaudit {

LimeStats LimeStats::fit(const Dataset& train) {
    if (train.size() == 0) throw DataError("lime: empty training set");
    LimeStats stats;
    const Matrix& x = train.rows();
    const std::size_t d = x.cols();
    const double n = static_cast<double>(x.rows());
    stats.means.assign(d, 0.0);
    stats.sds.assign(d, 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j) stats.means[j] += x(i, j);
    for (double& m : stats.means) m /= n;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = x(i, j) - stats.means[j];
            stats.sds[j] += c * c;
        }
    for (double& s : stats.sds) s = std::sqrt(s / n);
    for (const auto& g : train.schema().groups()) {
        std::vector<double> freq;
        for (std::size_t c : g.columns) freq.push_back(stats.means[c]);
        stats.level_frequencies.push_back(std::move(freq));
    }
    return stats;
}

Attribution lime_explain(const ProbabilityModel& model, const FeatureSchema& schema,
                         std::span<const double> instance, const LimeStats& stats,
                         const LimeParams& params, std::string instance_id) {
    const std::size_t d = schema.n_features();
    if (instance.size() != d || stats.means.size() != d)
        throw DataError("lime: instance width does not match schema");
    if (params.n_samples < d + 2)
        throw ConfigError("lime: n_samples must be >= n_features + 2");
    if (!(params.ridge > 0.0)) throw ConfigError("lime: ridge must be > 0");
    const double width =
        params.kernel_width > 0.0 ? params.kernel_width : 0.75 * std::sqrt(static_cast<double>(d));

    std::vector<char> continuous(d, 0);
    for (std::size_t j = 0; j < d; ++j)
        continuous[j] = schema.feature(j).kind == FeatureKind::Continuous;

    // Row 0 is the instance itself.
    Rng rng(params.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix samples(params.n_samples, d);
    std::copy(instance.begin(), instance.end(), samples.row(0).begin());
    for (std::size_t i = 1; i < params.n_samples; ++i) {
        auto r = samples.row(i);
        for (std::size_t j = 0; j < d; ++j)
            if (continuous[j]) r[j] = instance[j] + stats.sds[j] * gauss(rng);
        for (std::size_t g = 0; g < schema.groups().size(); ++g) {
            const auto& group = schema.groups()[g];
            const auto& freq = stats.level_frequencies.at(g);
            std::discrete_distribution<std::size_t> pick(freq.begin(), freq.end());
            const std::size_t level = pick(rng);
            for (std::size_t k = 0; k < group.columns.size(); ++k)
                r[group.columns[k]] = k == level ? 1.0 : 0.0;
        }
    }
    const std::vector<double> y = model.predict_proba(samples);

    const auto n = static_cast<Eigen::Index>(params.n_samples);
    const auto m = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd z(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            const double sd = stats.sds[jj] > 0.0 ? stats.sds[jj] : 1.0;
            z(i, j) = (samples(static_cast<std::size_t>(i), jj) - stats.means[jj]) / sd;
        }
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double dist2 = (z.row(i) - z.row(0)).squaredNorm();
        w[i] = std::exp(-dist2 / (width * width));
    }
    const double wsum = w.sum();
    if (!(wsum > 0.0)) throw NumericError("lime: all kernel weights vanished");

    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    const Eigen::RowVectorXd zbar = (w.transpose() * z) / wsum;
    const double ybar = w.dot(yv) / wsum;
    const Eigen::MatrixXd zc = z.rowwise() - zbar;
    const Eigen::VectorXd yc = yv.array() - ybar;

    Eigen::MatrixXd normal = zc.transpose() * w.asDiagonal() * zc;
    normal.diagonal().array() += params.ridge;
    const Eigen::VectorXd rhs = zc.transpose() * (w.asDiagonal() * yc);
    Eigen::LDLT<Eigen::MatrixXd> solver(normal);
    if (solver.info() != Eigen::Success) throw NumericError("lime: singular normal equations");
    const Eigen::VectorXd beta = solver.solve(rhs);
    if (!beta.allFinite()) throw NumericError("lime: singular normal equations");

    Attribution out;
    out.instance_id = std::move(instance_id);
    out.names = schema.names();
    out.values.assign(beta.data(), beta.data() + m);
    out.base_value = ybar;
    out.prediction = y[0];
    out.technique = "lime";
    return out;
}

}  // namespace xaudit
