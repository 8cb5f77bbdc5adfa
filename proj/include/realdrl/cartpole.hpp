#pragma once

#include "realdrl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

namespace realdrl {

// State ordering is (x, x_dot, theta, theta_dot).
struct CartPoleParams {
    double m_c = 0.94;
    double m_p = 0.23;
    double g = 9.8;
    double l = 0.32;
    double dt = 1.0 / 50.0;

    double total_mass() const { return m_c + m_p; }
};

struct PlantDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Vector dynamics_continuous(const Vector& s, double force, const CartPoleParams& p) {
    const double th = s[2], w = s[3];
    const double M = p.total_mass();
    const double sn = std::sin(th), cs = std::cos(th);
    const double tmp = (force + p.m_p * p.l * w * w * sn) / M;
    const double th_acc = (p.g * sn - cs * tmp) / (p.l * (4.0 / 3.0 - p.m_p * cs * cs / M));
    const double x_acc = (force + p.m_p * p.l * (w * w * sn - th_acc * cs)) / M;
    Vector d(4);
    d << s[1], x_acc, w, th_acc;
    return d;
}

inline double mechanical_energy(const Vector& s, const CartPoleParams& p) {
    const double v = s[1], th = s[2], w = s[3];
    return 0.5 * p.total_mass() * v * v + p.m_p * p.l * v * w * std::cos(th) +
           (2.0 / 3.0) * p.m_p * p.l * p.l * w * w + p.m_p * p.g * p.l * std::cos(th);
}

struct Disturbance {
    double action = 0.0;    // added to the commanded force
    double friction = 0.0;  // magnitude of a force opposing cart motion
};

// One RK4 step of dt with the disturbed force held constant over the step.
inline Vector step_plant(const Vector& s, double force, const Disturbance& dist,
                         const CartPoleParams& p) {
    double f = force + dist.action;
    if (s[1] > 0.0)
        f -= dist.friction;
    else if (s[1] < 0.0)
        f += dist.friction;
    const double h = p.dt;
    const Vector k1 = dynamics_continuous(s, f, p);
    const Vector k2 = dynamics_continuous(s + 0.5 * h * k1, f, p);
    const Vector k3 = dynamics_continuous(s + 0.5 * h * k2, f, p);
    const Vector k4 = dynamics_continuous(s + h * k3, f, p);
    Vector next = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) throw PlantDiverged("cart-pole state became non-finite");
    return next;
}

inline std::pair<RectMatrix, RectMatrix> linearize(const Vector& s, const CartPoleParams& p) {
    const double th = s[2], w = s[3];
    const double M = p.total_mass();
    const double sn = std::sin(th), cs = std::cos(th);
    const double sinc = std::abs(th) < 1e-6 ? 1.0 : sn / th;
    const double den = (4.0 / 3.0) * M - p.m_p * cs * cs;

    RectMatrix A = RectMatrix::Zero(4, 4);
    A(0, 1) = 1.0;
    A(2, 3) = 1.0;
    A(1, 2) = -p.m_p * p.g * sinc * cs / den;
    A(1, 3) = (4.0 / 3.0) * p.m_p * p.l * sn * w / den;
    A(3, 2) = p.g * sinc * M / (p.l * den);
    A(3, 3) = -p.m_p * sn * cs * w / den;

    RectMatrix B = RectMatrix::Zero(4, 1);
    B(1, 0) = (4.0 / 3.0) / den;
    B(3, 0) = -cs / (p.l * den);
    return {A, B};
}

inline std::pair<RectMatrix, RectMatrix> discretize(const RectMatrix& A_cont, const RectMatrix& B_cont,
                                                    double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("discretize: dt must be positive");
    return {RectMatrix::Identity(A_cont.rows(), A_cont.cols()) + dt * A_cont, dt * B_cont};
}

inline std::pair<RectMatrix, RectMatrix> discrete_model(const Vector& s, const CartPoleParams& p) {
    auto [A, B] = linearize(s, p);
    return discretize(A, B, p.dt);
}

// Bounded unknown on [lo, hi]: Beta(alpha_k, beta_k) with fresh shapes per draw.
struct BetaUnknown {
    double lo = 0.0;
    double hi = 1.0;
    double shape_lo = 0.5;
    double shape_hi = 5.0;

    void validate() const {
        if (!(lo < hi)) throw std::invalid_argument("BetaUnknown: need lo < hi");
        if (!(shape_lo > 0.0 && shape_lo <= shape_hi))
            throw std::invalid_argument("BetaUnknown: bad shape range");
    }
};

template <class Rng>
double sample_beta(double a, double b, Rng& rng) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    if (x + y == 0.0) return 0.5;
    return x / (x + y);
}

template <class Rng>
double sample_unknown(const BetaUnknown& gen, Rng& rng) {
    std::uniform_real_distribution<double> shape(gen.shape_lo, gen.shape_hi);
    const double a = shape(rng);
    const double b = shape(rng);
    const double u = sample_beta(a, b, rng);
    return std::clamp(gen.lo + (gen.hi - gen.lo) * u, gen.lo, gen.hi);
}

}  // namespace realdrl
