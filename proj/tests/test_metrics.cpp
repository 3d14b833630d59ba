#include <gtest/gtest.h>

#include <random>

#include "shuttle/metrics.hpp"

using namespace shuttle;

namespace {

Mat4 pure(const Eigen::Vector4cd& psi) { return psi * psi.adjoint() / psi.squaredNorm(); }

Eigen::Vector4cd product_vec(const Vec2& v, const Vec2& s) {
    Eigen::Vector4cd psi;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            psi(2 * a + b) = v(a) * s(b);
    return psi;
}

Vec2 up() { return (Vec2() << 1, 0).finished(); }
Vec2 down() { return (Vec2() << 0, 1).finished(); }

PhysicalParams params() {
    PhysicalParams p;
    p.B_z = 0.1;
    p.delta_g_over_g = 0.01;
    return p;
}

// Spin state at time t in the lab frame that unrotates to bloch_state(theta, phi).
Mat4 lab_state(double theta, double phi, double t, const PhysicalParams& p) {
    auto es = local_valley_eigensystem(1.0, 0.0);
    double w = rotating_frame_frequency(p) * t;
    return pure(product_vec(es.ground, bloch_state(theta, phi + 2.0 * w)));
}

} // namespace

TEST(Purity, ProductAndEntangled) {
    auto es = local_valley_eigensystem(1.0, 0.0);
    EXPECT_NEAR(spin_purity(pure(product_vec(es.ground, spin_plus_x()))), 1.0, 1e-15);
    Eigen::Vector4cd bell = product_vec(es.ground, up()) + product_vec(es.excited, down());
    EXPECT_NEAR(spin_purity(pure(bell)), 0.5, 1e-15);
    Mat4 mix = 0.5 * pure(product_vec(es.ground, up())) + 0.5 * pure(product_vec(es.ground, down()));
    EXPECT_NEAR(spin_purity(mix), 0.5, 1e-15);
}

TEST(Purity, InvariantUnderValleyUnitary) {
    auto es = local_valley_eigensystem(1.0, 0.0);
    Mat4 rho = pure(product_vec(es.ground, bloch_state(0.7, 1.9)));
    Mat2 u;
    u << std::polar(1.0, 0.3) * std::cos(0.4), std::sin(0.4), -std::sin(0.4), std::polar(1.0, -0.3) * std::cos(0.4);
    Mat4 U = kron(u, pauli::identity());
    EXPECT_NEAR(spin_purity(U * rho * U.adjoint()), 1.0, 1e-14);
}

TEST(ExcitedPopulation, Limits) {
    cplx d(2.0, -1.0);
    auto es = local_valley_eigensystem(d.real(), d.imag());
    Mat4 g = pure(product_vec(es.ground, up()));
    Mat4 e = pure(product_vec(es.excited, up()));
    EXPECT_NEAR(excited_valley_population(g, d.real(), d.imag()), 0.0, 1e-15);
    EXPECT_NEAR(excited_valley_population(e, d.real(), d.imag()), 1.0, 1e-15);
    EXPECT_NEAR(excited_valley_population(0.5 * (g + e), d.real(), d.imag()), 0.5, 1e-15);
    EXPECT_THROW(excited_valley_population(g, 0.0, 0.0), ValleyDegeneracyError);
}

TEST(Unrotate, Basics) {
    auto p = params();
    auto es = local_valley_eigensystem(1.0, 0.0);
    Mat4 rho = pure(product_vec(es.ground, bloch_state(1.0, 0.2)));
    EXPECT_LT((unrotate(rho, 0.0, p) - rho).cwiseAbs().maxCoeff(), 1e-15);
    Mat4 z = pure(product_vec(es.ground, up()));
    EXPECT_LT((unrotate(z, 123.4, p) - z).cwiseAbs().maxCoeff(), 1e-15);
    Mat4 x = pure(product_vec(es.ground, spin_plus_x()));
    double period = constants::two_pi * p.hbar / (p.zeeman() + 2.0 * p.gamma());
    EXPECT_LT((unrotate(x, period, p) - x).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_THROW(unrotate(x, -1.0, p), DomainError);
}

TEST(Unrotate, ReductionOrderCommutes) {
    auto p = params();
    auto es = local_valley_eigensystem(0.3, 2.0);
    Mat4 rho = 0.6 * pure(product_vec(es.ground, bloch_state(0.4, 2.0))) +
               0.4 * pure(product_vec(es.excited, bloch_state(2.0, -1.0)));
    Mat2 a = reduce_to_spin(unrotate(rho, 77.0, p));
    Mat2 b = unrotate_spin(reduce_to_spin(rho), 77.0, p);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Fidelity, IdenticalPureStates) {
    auto p = params();
    std::vector<Mat4> s(5, lab_state(1.2, 0.5, 40.0, p));
    auto rep = ensemble_fidelity(s, 40.0, p);
    EXPECT_NEAR(rep.F_mean, 1.0, 1e-12);
    EXPECT_NEAR(rep.sigma_F, 0.0, 1e-12);
    EXPECT_NEAR(rep.theta, 1.2, 1e-9);
    EXPECT_NEAR(rep.phi, 0.5, 1e-9);
    EXPECT_FALSE(rep.degenerate_center);
}

TEST(Fidelity, AntipodalEquatorStates) {
    auto p = params();
    std::vector<Mat4> s{lab_state(0.5 * constants::pi, 0.0, 0.0, p), lab_state(0.5 * constants::pi, constants::pi, 0.0, p)};
    auto rep = ensemble_fidelity(s, 0.0, p);
    EXPECT_TRUE(rep.degenerate_center);
    EXPECT_NEAR(rep.theta, 0.5 * constants::pi, 0.0);
    EXPECT_EQ(rep.phi, 0.0);
    // The (pi/2, 0) center is the +x state itself, so the pair scores 1 and 0.
    EXPECT_NEAR(rep.F[0], 1.0, 1e-12);
    EXPECT_NEAR(rep.F[1], 0.0, 1e-12);
    EXPECT_NEAR(rep.F_mean, 0.5, 1e-12);
}

TEST(Fidelity, SingleMixedStateOnAxis) {
    auto p = params();
    auto es = local_valley_eigensystem(1.0, 0.0);
    Mat4 rho = 0.9 * pure(product_vec(es.ground, up())) + 0.1 * pure(product_vec(es.ground, down()));
    std::vector<Mat4> s{rho};
    auto rep = ensemble_fidelity(s, 0.0, p);
    EXPECT_NEAR(rep.F_mean, 0.5 * (1.0 + 0.8 * 0.8), 1e-12);
}

TEST(Fidelity, SingleMixedStateGeneral) {
    auto p = params();
    auto es = local_valley_eigensystem(1.0, 0.0);
    Mat4 a = pure(product_vec(es.ground, bloch_state(0.9, 0.3)));
    Mat4 b = pure(product_vec(es.ground, bloch_state(2.0, 2.5)));
    std::vector<Mat4> s{0.8 * a + 0.2 * b};
    auto rep = ensemble_fidelity(s, 0.0, p);
    const auto& r = rep.r[0];
    // theta = arccos(r_z) of the unnormalised center, phi along (r_x, r_y)
    double n_dot_r = std::sqrt(1.0 - r[2] * r[2]) * std::hypot(r[0], r[1]) + r[2] * r[2];
    EXPECT_NEAR(rep.F_mean, 0.5 * (1.0 + n_dot_r), 1e-12);
}

TEST(Fidelity, HeldOutCenter) {
    auto p = params();
    std::vector<Mat4> states{lab_state(0.3, 0.0, 10.0, p)};
    std::vector<Mat4> center{lab_state(0.0, 0.0, 10.0, p)};
    auto rep = ensemble_fidelity(states, center, 10.0, p);
    EXPECT_NEAR(rep.F_mean, std::cos(0.15) * std::cos(0.15), 1e-12);
}

TEST(Fidelity, RotationCovariance) {
    auto p = params();
    std::vector<Mat4> s{lab_state(1.0, 0.1, 0.0, p), lab_state(1.3, 0.4, 0.0, p), lab_state(0.8, -0.2, 0.0, p)};
    auto a = ensemble_fidelity(s, 0.0, p);
    // Global spin rotation about z by 0.9 rad.
    Mat2 rz = Mat2::Zero();
    rz(0, 0) = std::polar(1.0, -0.45);
    rz(1, 1) = std::polar(1.0, 0.45);
    Mat4 R = kron(pauli::identity(), rz);
    std::vector<Mat4> rot;
    for (const auto& r : s)
        rot.push_back(R * r * R.adjoint());
    auto b = ensemble_fidelity(rot, 0.0, p);
    for (std::size_t i = 0; i < s.size(); ++i)
        EXPECT_NEAR(a.F[i], b.F[i], 1e-12);
    EXPECT_NEAR(b.phi - a.phi, 0.9, 1e-12);
}

TEST(Fidelity, DecreasesWithIsotropicNoise) {
    auto p = params();
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    double prev = 1.0 + 1e-12;
    for (double eps : {0.0, 0.05, 0.1, 0.2, 0.4}) {
        std::vector<Mat4> s;
        for (int k = 0; k < 400; ++k)
            s.push_back(lab_state(0.5 * constants::pi + eps * n(rng), eps * n(rng), 0.0, p));
        double f = ensemble_fidelity(s, 0.0, p).F_mean;
        EXPECT_LT(f, prev);
        prev = f;
    }
}

TEST(Fidelity, EmptyEnsemble) {
    std::vector<Mat4> none;
    EXPECT_THROW(ensemble_fidelity(none, 0.0, params()), DomainError);
}

TEST(Stats, PopulationStd) {
    std::vector<double> x{1.0, 3.0};
    EXPECT_NEAR(population_std<double>(x), 1.0, 1e-15);
}
