#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "xaudit/dataset.hpp"
#include "xaudit/models.hpp"

namespace xaudit::testing {

/// Continuous features named f0..f{n-1}, Uniform(0, 1), with the given weights.
inline SyntheticSpec uniform_spec(std::size_t n_rows, std::vector<double> weights,
                                  double intercept = 0.0, double noise = 0.0) {
    SyntheticSpec spec;
    spec.n_rows = n_rows;
    for (std::size_t j = 0; j < weights.size(); ++j)
        spec.continuous.push_back({"f" + std::to_string(j), Distribution::Uniform, 0.0, 1.0});
    spec.true_weights = std::move(weights);
    spec.intercept = intercept;
    spec.label_noise = noise;
    return spec;
}

/// Two continuous features and one three-level group.
inline SyntheticSpec mixed_spec(std::size_t n_rows) {
    SyntheticSpec spec;
    spec.n_rows = n_rows;
    spec.continuous = {{"income", Distribution::LogNormal, 0.0, 0.5},
                       {"rate", Distribution::Uniform, 0.05, 0.3}};
    spec.groups = {{"grade", {"A", "B", "C"}, {0.3, 0.5, 0.2}}};
    spec.true_weights = {0.8, -10.0, 1.0, 0.0, -1.0};
    spec.intercept = 1.0;
    return spec;
}

/// Dataset from literal rows over continuous features x0..x{d-1}.
inline Dataset literal_dataset(const std::vector<std::vector<double>>& rows,
                               const std::vector<int>& labels) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < rows.front().size(); ++j) names.push_back("x" + std::to_string(j));
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back("r" + std::to_string(i));
    return Dataset(FeatureSchema::build(names, {}), Matrix::from_rows(rows), labels, ids);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace xaudit::testing
