#include "plsinet/numerics.hpp"

#include "plsinet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/distributions/normal.hpp>

namespace plsinet {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace

std::array<std::uint32_t, 4> Rng::philox4x32_10(std::array<std::uint32_t, 4> c,
                                                std::array<std::uint32_t, 2> k) noexcept {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kPhiloxW0;
        k[1] += kPhiloxW1;
    }
    return c;
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) noexcept : key_(seed), stream_(stream) {}

Rng Rng::substream(std::uint64_t id) const noexcept {
    return Rng(key_, mix64(id ^ mix64(stream_ + 0x9E3779B97F4A7C15ull)));
}

void Rng::refill() noexcept {
    const std::array<std::uint32_t, 4> ctr{
        static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(key_),
                                           static_cast<std::uint32_t>(key_ >> 32)};
    const auto out = philox4x32_10(ctr, key);
    buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    buffered_ = 2;
    ++block_;
}

std::uint64_t Rng::next_u64() noexcept {
    if (buffered_ == 0) {
        refill();
    }
    return buffer_[2 - buffered_--];
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() noexcept {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    // u1 in (0, 1] keeps the log finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) noexcept {
    // Lemire's multiply-shift with rejection.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(next_u64()) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

bool Rng::bernoulli(double p) noexcept {
    return uniform() < p;
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

std::vector<double> Matrix::column(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        out[i] = (*this)(i, j);
    }
    return out;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            t(j, i) = (*this)(i, j);
        }
    }
    return t;
}

Matrix Matrix::multiply(const Matrix& rhs) const {
    if (cols_ != rhs.rows_) {
        throw ShapeError("matrix product shape mismatch: " + std::to_string(cols_) + " vs " +
                         std::to_string(rhs.rows_));
    }
    Matrix out(rows_, rhs.cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t k = 0; k < cols_; ++k) {
            const double a = (*this)(i, k);
            for (std::size_t j = 0; j < rhs.cols_; ++j) {
                out(i, j) += a * rhs(k, j);
            }
        }
    }
    return out;
}

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const {
    Matrix out(idx.size(), cols_);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto src = row(idx[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

Matrix cholesky(const Matrix& cov) {
    const std::size_t n = cov.rows();
    if (cov.cols() != n) {
        throw ShapeError("cholesky requires a square matrix");
    }
    Matrix L(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = cov(j, j);
        for (std::size_t k = 0; k < j; ++k) {
            diag -= L(j, k) * L(j, k);
        }
        if (!(diag > 0.0) || !std::isfinite(diag)) {
            throw FactorizationError("matrix is not positive definite: pivot " +
                                         std::to_string(j) + " is " + std::to_string(diag),
                                     j);
        }
        const double ljj = std::sqrt(diag);
        L(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = cov(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                s -= L(i, k) * L(j, k);
            }
            L(i, j) = s / ljj;
        }
    }
    return L;
}

Matrix mvn_sample(Rng& rng, std::span<const double> mean, const Matrix& chol, std::size_t n) {
    const std::size_t p = chol.rows();
    if (chol.cols() != p || mean.size() != p) {
        throw ShapeError("mvn_sample: mean length " + std::to_string(mean.size()) +
                         " and factor " + std::to_string(chol.rows()) + "x" +
                         std::to_string(chol.cols()) + " are inconsistent");
    }
    Matrix out(n, p);
    std::vector<double> z(p);
    for (std::size_t r = 0; r < n; ++r) {
        for (auto& v : z) {
            v = rng.normal();
        }
        auto dst = out.row(r);
        for (std::size_t i = 0; i < p; ++i) {
            double s = mean[i];
            for (std::size_t k = 0; k <= i; ++k) {
                s += chol(i, k) * z[k];
            }
            dst[i] = s;
        }
    }
    return out;
}

double standard_normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double standard_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("normal quantile requires 0 < p < 1, got " + std::to_string(p));
    }
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double quantile_sorted(std::span<const double> sorted, double prob) {
    if (sorted.empty()) {
        throw EmptyDataError("quantile of an empty sample");
    }
    if (!(prob >= 0.0 && prob <= 1.0)) {
        throw DomainError("quantile probability must lie in [0, 1]");
    }
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double prob) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, prob);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: length mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double norm2(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) {
        s += v * v;
    }
    return std::sqrt(s);
}

double mean(std::span<const double> a) {
    if (a.empty()) {
        throw EmptyDataError("mean of an empty sample");
    }
    double s = 0.0;
    for (double v : a) {
        s += v;
    }
    return s / static_cast<double>(a.size());
}

double sample_sd(std::span<const double> a) {
    if (a.size() < 2) {
        return 0.0;
    }
    const double m = mean(a);
    double ss = 0.0;
    for (double v : a) {
        ss += (v - m) * (v - m);
    }
    return std::sqrt(ss / static_cast<double>(a.size() - 1));
}

} // namespace plsinet
