#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>

#include "ineqalm/rng.hpp"

namespace ineqalm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Linear map given by forward/adjoint callables. An optional dense
/// materialization backs the certification path; when present it must agree
/// with the callables entrywise.
struct LinearOperator {
    Index rows = 0;
    Index cols = 0;
    std::function<Vector(const Vector&)> forward;
    std::function<Vector(const Vector&)> adjoint;
    std::optional<Matrix> dense;

    Vector apply(const Vector& x) const {
        if (x.size() != cols) throw std::invalid_argument("LinearOperator::apply: size mismatch");
        return forward(x);
    }

    Vector apply_adjoint(const Vector& y) const {
        if (y.size() != rows) throw std::invalid_argument("LinearOperator::apply_adjoint: size mismatch");
        return adjoint(y);
    }

    /// Dense matrix view. Falls back to probing unit vectors, guarded so the
    /// certification path cannot silently densify a large operator.
    Matrix materialize(Index guard = 2000) const {
        if (dense) return *dense;
        if (rows + cols > guard)
            throw std::invalid_argument("LinearOperator::materialize: size guard exceeded");
        Matrix out(rows, cols);
        Vector e = Vector::Zero(cols);
        for (Index j = 0; j < cols; ++j) {
            e[j] = 1.0;
            out.col(j) = forward(e);
            e[j] = 0.0;
        }
        return out;
    }
};

inline LinearOperator dense_operator(Matrix A) {
    LinearOperator op;
    op.rows = A.rows();
    op.cols = A.cols();
    auto shared = std::make_shared<Matrix>(std::move(A));
    op.forward = [shared](const Vector& x) -> Vector { return (*shared) * x; };
    op.adjoint = [shared](const Vector& y) -> Vector { return shared->transpose() * y; };
    op.dense = *shared;
    return op;
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

/// Componentwise projection onto the nonnegative orthant, [v]_+.
inline Vector project_nonneg(const Vector& v) { return v.cwiseMax(0.0); }

/// Per-site projection onto the l2 ball of radius alpha. The field stores the
/// site_dim components of each site contiguously.
inline Vector project_l2_ball_sitewise(const Vector& q, double alpha, Index site_dim) {
    if (alpha <= 0.0) throw std::invalid_argument("project_l2_ball_sitewise: alpha must be positive");
    if (site_dim <= 0 || q.size() % site_dim != 0)
        throw std::invalid_argument("project_l2_ball_sitewise: field size not a multiple of site_dim");
    Vector out = q;
    const Index n_sites = q.size() / site_dim;
    for (Index s = 0; s < n_sites; ++s) {
        auto v = out.segment(s * site_dim, site_dim);
        const double norm = v.norm();
        if (norm > alpha) v *= alpha / norm;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Proximity operators, prox(y, c) = argmin_z theta(z) + 1/(2c) ||z - y||^2
// ---------------------------------------------------------------------------

inline double soft_threshold(double y, double t) {
    if (y > t) return y - t;
    if (y < -t) return y + t;
    return 0.0;
}

/// Prox of the l1 norm: componentwise soft thresholding at level c.
inline Vector prox_l1(const Vector& y, double c) {
    if (c <= 0.0) throw std::invalid_argument("prox_l1: c must be positive");
    return y.unaryExpr([c](double v) { return soft_threshold(v, c); });
}

/// Prox of theta(z) = 1/2 z^T P z for symmetric PSD P: solves (cP + I) z = y.
/// Diagonal P reduces to a componentwise divide.
inline Vector prox_quadratic(const Vector& y, double c, const Matrix& P) {
    if (c <= 0.0) throw std::invalid_argument("prox_quadratic: c must be positive");
    if (P.rows() != P.cols() || P.rows() != y.size())
        throw std::invalid_argument("prox_quadratic: P shape mismatch");
    const double scale = 1.0 + P.cwiseAbs().maxCoeff();
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw std::invalid_argument("prox_quadratic: P must be symmetric");
    if (P.isDiagonal(0.0))
        return y.array() / (c * P.diagonal().array() + 1.0);
    Matrix S = c * P;
    S.diagonal().array() += 1.0;
    return S.llt().solve(y);  // SPD by the identity shift
}

// ---------------------------------------------------------------------------
// Spectral radius of A^T A by power iteration
// ---------------------------------------------------------------------------

struct SpectralEstimate {
    double value = 0.0;    // inflated Rayleigh-quotient estimate of rho(A^T A)
    long iterations = 0;
    bool converged = false;
};

/// Power iteration on A^T A from a seeded random start. Convergence is
/// declared when successive Rayleigh quotients agree to relative `tol`; the
/// returned value is inflated by (1 + tol) so that r built from it keeps the
/// strict inequality r > beta * rho(A^T A).
inline SpectralEstimate estimate_spectral_radius(const LinearOperator& A, double tol = 1e-6,
                                                 long max_iter = 5000, std::uint64_t seed = 0) {
    if (A.rows <= 0 || A.cols <= 0)
        throw std::invalid_argument("estimate_spectral_radius: degenerate operator");
    if (tol <= 0.0) throw std::invalid_argument("estimate_spectral_radius: tol must be positive");

    CounterRng rng(seed, /*stream=*/0x5bd1);
    Vector v(A.cols);
    for (Index i = 0; i < v.size(); ++i) v[i] = rng.next_gaussian();
    double vnorm = v.norm();
    if (vnorm == 0.0) v.setOnes(), vnorm = v.norm();
    v /= vnorm;

    SpectralEstimate est;
    double prev = -1.0;
    for (long it = 1; it <= max_iter; ++it) {
        Vector av = A.apply(v);
        Vector w = A.apply_adjoint(av);  // A^T A v
        const double rayleigh = av.squaredNorm();
        est.iterations = it;
        const double wnorm = w.norm();
        if (wnorm == 0.0) {
            // A^T A v = 0 with a random v: the operator is numerically zero.
            est.value = 0.0;
            est.converged = true;
            return est;
        }
        if (prev >= 0.0 && std::abs(rayleigh - prev) <= tol * std::max(rayleigh, 1e-300)) {
            est.value = rayleigh * (1.0 + tol);
            est.converged = true;
            return est;
        }
        prev = rayleigh;
        v = w / wnorm;
    }
    est.value = prev * (1.0 + tol);
    est.converged = false;
    return est;
}

// ---------------------------------------------------------------------------
// Problem building blocks
// ---------------------------------------------------------------------------

/// Objective handle: an optional evaluator (extended-real, for reporting) and
/// the prox map. Where a problem constrains x to a set X, the registered prox
/// must solve the combined subproblem over X exactly.
struct ProxFunction {
    std::function<double(const Vector&)> evaluate;       // may be empty
    std::function<Vector(const Vector&, double)> prox;   // (y, c) -> argmin
};

struct ProjectionSet {
    std::function<Vector(const Vector&)> project;
    std::function<bool(const Vector&, double)> contains;  // (v, tol)
};

inline ProxFunction prox_of_zero() {
    ProxFunction f;
    f.evaluate = [](const Vector&) { return 0.0; };
    f.prox = [](const Vector& y, double) { return y; };
    return f;
}

inline ProxFunction prox_of_l1(double weight = 1.0) {
    if (weight <= 0.0) throw std::invalid_argument("prox_of_l1: weight must be positive");
    ProxFunction f;
    f.evaluate = [weight](const Vector& x) { return weight * x.lpNorm<1>(); };
    f.prox = [weight](const Vector& y, double c) { return prox_l1(y, c * weight); };
    return f;
}

/// theta(x) = 1/2 x^T P x + q^T x with symmetric PSD P.
inline ProxFunction prox_of_quadratic(Matrix P, Vector q = Vector()) {
    auto shared_p = std::make_shared<Matrix>(std::move(P));
    auto shared_q = std::make_shared<Vector>(std::move(q));
    ProxFunction f;
    f.evaluate = [shared_p, shared_q](const Vector& x) {
        double val = 0.5 * x.dot(*shared_p * x);
        if (shared_q->size() > 0) val += shared_q->dot(x);
        return val;
    };
    f.prox = [shared_p, shared_q](const Vector& y, double c) {
        Vector shifted = (shared_q->size() > 0) ? Vector(y - c * (*shared_q)) : y;
        return prox_quadratic(shifted, c, *shared_p);
    };
    return f;
}

inline ProjectionSet whole_space() {
    ProjectionSet s;
    s.project = [](const Vector& v) { return v; };
    s.contains = [](const Vector&, double) { return true; };
    return s;
}

inline ProjectionSet nonneg_orthant() {
    ProjectionSet s;
    s.project = [](const Vector& v) { return project_nonneg(v); };
    s.contains = [](const Vector& v, double tol) { return v.minCoeff() >= -tol; };
    return s;
}

inline ProjectionSet box_set(Vector lo, Vector hi) {
    if (lo.size() != hi.size() || (hi - lo).minCoeff() < 0.0)
        throw std::invalid_argument("box_set: invalid bounds");
    auto l = std::make_shared<Vector>(std::move(lo));
    auto h = std::make_shared<Vector>(std::move(hi));
    ProjectionSet s;
    s.project = [l, h](const Vector& v) -> Vector { return v.cwiseMax(*l).cwiseMin(*h); };
    s.contains = [l, h](const Vector& v, double tol) {
        return (v - *l).minCoeff() >= -tol && (*h - v).minCoeff() >= -tol;
    };
    return s;
}

inline ProjectionSet l2_ball_sitewise_set(double alpha, Index site_dim) {
    ProjectionSet s;
    s.project = [alpha, site_dim](const Vector& v) {
        return project_l2_ball_sitewise(v, alpha, site_dim);
    };
    s.contains = [alpha, site_dim](const Vector& v, double tol) {
        const Index n_sites = v.size() / site_dim;
        for (Index i = 0; i < n_sites; ++i)
            if (v.segment(i * site_dim, site_dim).norm() > alpha + tol) return false;
        return true;
    };
    return s;
}

}  // namespace ineqalm
