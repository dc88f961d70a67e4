#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace plsinet {

/// Counter-based Philox4x32-10 generator.
///
/// The 128-bit counter is split into a 64-bit block index (low half) and a
/// 64-bit stream id (high half); the 64-bit seed is the key. Two generators
/// with the same seed and different stream ids therefore never produce
/// overlapping blocks. Normal variates use the Box-Muller transform, with the
/// second variate of each pair cached.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    /// Independent child stream. Distinct ids under the same parent always
    /// map to distinct stream values (the mixing step is a bijection of id).
    Rng substream(std::uint64_t id) const noexcept;

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double normal() noexcept;
    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) noexcept;
    bool bernoulli(double p) noexcept;

    std::uint64_t seed() const noexcept { return key_; }
    std::uint64_t stream() const noexcept { return stream_; }

    /// Raw Philox4x32-10 block function, exposed for known-answer tests.
    static std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                                      std::array<std::uint32_t, 2> key) noexcept;

private:
    void refill() noexcept;

    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int buffered_ = 0;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }
    std::vector<double> column(std::size_t j) const;

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

    Matrix transpose() const;
    Matrix multiply(const Matrix& rhs) const;
    /// Rows selected by index, in the given order (duplicates allowed).
    Matrix select_rows(std::span<const std::size_t> idx) const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Lower-triangular L with L * L^T = cov. Throws FactorizationError naming the
/// first non-positive pivot.
Matrix cholesky(const Matrix& cov);

/// n draws of mean + L z with z standard normal, one draw per row.
Matrix mvn_sample(Rng& rng, std::span<const double> mean, const Matrix& chol, std::size_t n);

double standard_normal_cdf(double x);
/// Inverse of the standard normal CDF on (0, 1).
double standard_normal_quantile(double p);

/// Type-7 sample quantile (linear interpolation between order statistics).
/// `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double prob);
double quantile(std::vector<double> values, double prob);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double mean(std::span<const double> a);
/// Sample standard deviation with the n-1 denominator; 0 for fewer than two values.
double sample_sd(std::span<const double> a);

} // namespace plsinet
