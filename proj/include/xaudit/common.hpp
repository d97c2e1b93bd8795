#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xaudit {

// Error taxonomy. The CLI maps each class onto a distinct exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

/// Dense row-major matrix of doubles. Rows are exposed as spans so model
/// code can work on a single instance without copying.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0; }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    std::span<const double> data() const { return data_; }

    Matrix select_rows(std::span<const std::size_t> indices) const;
    void append_row(std::span<const double> values);
    std::vector<double> column(std::size_t j) const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

using Rng = std::mt19937_64;

// Stable seed derivation. Sub-seeds are a pure function of the parent seed
// and the tag, independent of call order.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

template <typename... Ts>
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t first, Ts... rest) {
    std::uint64_t s = mix_seed(master, first);
    ((s = mix_seed(s, static_cast<std::uint64_t>(rest))), ...);
    return s;
}

/// FNV-1a, 64-bit, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Draws `k` distinct elements of `pool` (partial Fisher-Yates). Order of the
/// result follows the draw order.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool,
                                                    std::size_t k, Rng& rng);

double sigmoid(double z);
double mean(std::span<const double> values);

}  // namespace xaudit
