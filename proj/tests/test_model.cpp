#include "doctest.h"

#include "plsinet/errors.hpp"
#include "plsinet/model.hpp"
#include "plsinet/simgen.hpp"

#include <cmath>

using namespace plsinet;

namespace {

ModelParams zero_model(std::size_t p, std::size_t q) {
    ModelParams m;
    m.beta.assign(p, 0.0);
    m.beta[0] = 1.0;
    m.gamma.assign(q, 0.0);
    m.mlp.hidden = {1};
    m.theta = zero_params(m.mlp);
    return m;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("index") {
    Rng rng(1);
    Matrix X(5, 3);
    for (auto& v : X.data()) v = rng.normal();
    auto m = zero_model(3, 1);
    CHECK(index(m, X) == X.column(0));

    m = zero_model(8, 1);
    m.beta = reference_beta();
    const Matrix ones(1, 8, 1.0);
    CHECK(index(m, ones)[0] == doctest::Approx(1.9 / std::sqrt(2.09)).epsilon(1e-12));
    CHECK(index(m, ones)[0] == doctest::Approx(1.31424).epsilon(1e-5));

    CHECK(index(m, Matrix(0, 8)).empty());
    CHECK_THROWS_AS(index(m, Matrix(2, 3)), ShapeError);
}

TEST_CASE("predict_eta") {
    Rng rng(2);
    Matrix X(4, 2), Z(4, 3);
    for (auto& v : X.data()) v = rng.normal();
    for (auto& v : Z.data()) v = rng.normal();
    auto m = zero_model(2, 3);
    m.gamma = {0.5, -1.0, 2.0};
    const auto eta = predict_eta(m, X, Z);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(eta[i] == 0.5 * Z(i, 0) - 1.0 * Z(i, 1) + 2.0 * Z(i, 2));
    }

    auto h = zero_model(2, 1);
    h.mlp.activation = Activation::tanh;
    const auto lay = layer_layout(h.mlp);
    h.theta.flat[lay[0].weight_offset] = 1.0;
    h.theta.flat[lay[1].weight_offset] = 2.0;
    const Matrix x1(1, 2, {0.5, 3.0});
    const Matrix z0(1, 1, {0.0});
    CHECK(predict_eta(h, x1, z0)[0] == doctest::Approx(0.924234).epsilon(1e-6));

    Matrix Zc(4, 3);
    for (std::size_t i = 0; i < 4; ++i) {
        Zc(i, 0) = 1.0;
        Zc(i, 1) = Z(i, 1);
        Zc(i, 2) = Z(i, 2);
    }
    auto shifted = m;
    shifted.gamma[0] += 0.75;
    const auto e0 = predict_eta(m, X, Zc);
    const auto e1 = predict_eta(shifted, X, Zc);
    for (std::size_t i = 0; i < 4; ++i) CHECK(e1[i] - e0[i] == doctest::Approx(0.75));
    CHECK_THROWS_AS(predict_eta(m, X, Matrix(3, 3)), ShapeError);
}

TEST_CASE("project_identifiable") {
    const auto a = project_identifiable(std::vector<double>{0.6, -0.8});
    CHECK(a.beta[0] == doctest::Approx(0.6));
    CHECK(a.beta[1] == doctest::Approx(-0.8));
    CHECK_FALSE(a.flipped);

    const auto b = project_identifiable(std::vector<double>{-3.0, 4.0});
    CHECK(b.beta[0] == doctest::Approx(0.6));
    CHECK(b.beta[1] == doctest::Approx(-0.8));
    CHECK(b.flipped);

    CHECK_THROWS_AS(project_identifiable(std::vector<double>{0.0, 0.0}), DegenerateDirectionError);

    // Leading zero: the first non-zero coordinate decides the sign.
    const auto c = project_identifiable(std::vector<double>{0.0, -2.0, 1.0});
    CHECK(c.beta[0] == 0.0);
    CHECK(c.beta[1] > 0.0);
    CHECK(c.flipped);
}

TEST_CASE("project_identifiable is idempotent and sign invariant") {
    Rng rng(3);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> v(1 + rng.uniform_index(8));
        for (double& x : v) x = rng.normal();
        const auto once = project_identifiable(v);
        const auto twice = project_identifiable(once.beta);
        CHECK_FALSE(twice.flipped);
        for (std::size_t j = 0; j < v.size(); ++j) CHECK(twice.beta[j] == doctest::Approx(once.beta[j]).epsilon(1e-15));
        CHECK(std::abs(norm2(once.beta) - 1.0) < 1e-12);
        CHECK(once.beta[0] >= 0.0);
        std::vector<double> neg = v;
        for (double& x : neg) x *= -2.5;
        const auto other = project_identifiable(neg);
        for (std::size_t j = 0; j < v.size(); ++j) CHECK(other.beta[j] == doctest::Approx(once.beta[j]));
    }
}

TEST_CASE("invariant checks") {
    auto m = zero_model(2, 1);
    CHECK_NOTHROW(m.check_invariants());
    m.beta = {-1.0, 0.0};
    CHECK_THROWS_AS(m.check_invariants(), DomainError);
    m.beta = {0.5, 0.5};
    CHECK_THROWS_AS(m.check_invariants(), DomainError);
}

TEST_CASE("mean links") {
    const std::vector<double> eta{0.0, 1.0, -2.0};
    CHECK(apply_mean_link(Family::gaussian, eta) == eta);
    CHECK(apply_mean_link(Family::binomial, eta)[0] == 0.5);
    CHECK(apply_mean_link(Family::poisson, eta)[1] == doctest::Approx(2.718282).epsilon(1e-6));
    CHECK_THROWS_AS(apply_mean_link(Family::cox, eta), UnsupportedFamilyError);
}

TEST_CASE("family names") {
    CHECK(parse_family("binary") == Family::binomial);
    CHECK(parse_family("survival") == Family::cox);
    CHECK(parse_family("count") == Family::poisson);
    CHECK(to_string(Family::gaussian) == "gaussian");
    CHECK_THROWS(parse_family("gamma"));
}

} // TEST_SUITE
