#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ineqalm/problem.hpp"
#include "ineqalm/rng.hpp"

namespace ineqalm::qp {

/// Objective selector for generic QP-style instances. L1Quadratic restricts P
/// to a diagonal so the prox stays exact.
struct ThetaSpec {
    enum class Kind { Quadratic, L1, L1Quadratic };
    Kind kind = Kind::Quadratic;
    Matrix P;          // quadratic part (may be empty for pure l1)
    Vector q;          // linear part (optional)
    double l1_weight = 1.0;
};

struct SetSpec {
    enum class Kind { Free, Nonneg, Box };
    Kind kind = Kind::Free;
    Vector lo, hi;  // box bounds
};

namespace detail {

inline bool is_diagonal(const Matrix& P) { return P.size() == 0 || P.isDiagonal(0.0); }

/// Componentwise prox of w|z| + p/2 z^2 + q z over [lo, hi]: the clamp of the
/// unconstrained 1-D minimizer soft(y - c q, c w) / (1 + c p).
inline Vector separable_prox(const Vector& y, double c, const Vector& p, const Vector& q,
                             double l1_weight, const Vector& lo, const Vector& hi) {
    Vector out(y.size());
    for (Index i = 0; i < y.size(); ++i) {
        double v = y[i] - (q.size() ? c * q[i] : 0.0);
        if (l1_weight > 0.0) v = soft_threshold(v, c * l1_weight);
        v /= 1.0 + (p.size() ? c * p[i] : 0.0);
        if (lo.size()) v = std::max(v, lo[i]);
        if (hi.size()) v = std::min(v, hi[i]);
        out[i] = v;
    }
    return out;
}

}  // namespace detail

/// Assembles a ProblemSpec from dense data. Constrained X or an l1 term
/// require diagonal P, so the registered prox solves the combined subproblem
/// over X exactly.
inline ProblemSpec build_qp_problem(const ThetaSpec& theta, const SetSpec& set, Matrix A, Vector b,
                                    std::string name = "qp") {
    ProblemSpec p;
    p.n = A.cols();
    p.m = A.rows();
    p.A = dense_operator(std::move(A));
    p.b = std::move(b);
    p.name = std::move(name);

    const bool constrained = set.kind != SetSpec::Kind::Free;
    const bool has_l1 = theta.kind != ThetaSpec::Kind::Quadratic;
    if ((constrained || has_l1) && !detail::is_diagonal(theta.P))
        throw std::invalid_argument(
            "build_qp_problem: combined prox over a set or with an l1 term needs diagonal P");
    if (theta.P.size() && (theta.P.rows() != p.n || theta.P.cols() != p.n))
        throw std::invalid_argument("build_qp_problem: P shape mismatch");
    if (theta.q.size() && theta.q.size() != p.n)
        throw std::invalid_argument("build_qp_problem: q length mismatch");

    switch (set.kind) {
        case SetSpec::Kind::Free: p.X = whole_space(); break;
        case SetSpec::Kind::Nonneg: p.X = nonneg_orthant(); break;
        case SetSpec::Kind::Box:
            if (set.lo.size() != p.n || set.hi.size() != p.n)
                throw std::invalid_argument("build_qp_problem: box bounds length mismatch");
            p.X = box_set(set.lo, set.hi);
            break;
    }

    if (!constrained && !has_l1) {
        p.theta = prox_of_quadratic(theta.P.size() ? theta.P : Matrix::Zero(p.n, p.n), theta.q);
        return p;
    }

    const double w1 = has_l1 ? theta.l1_weight : 0.0;
    if (has_l1 && !(w1 > 0.0)) throw std::invalid_argument("build_qp_problem: l1 weight must be positive");
    Vector pd = theta.P.size() ? Vector(theta.P.diagonal()) : Vector();
    Vector q = theta.q;
    Vector lo, hi;
    if (set.kind == SetSpec::Kind::Nonneg) {
        lo = Vector::Zero(p.n);
    } else if (set.kind == SetSpec::Kind::Box) {
        lo = set.lo;
        hi = set.hi;
    }
    p.theta.prox = [pd, q, w1, lo, hi](const Vector& y, double c) {
        return detail::separable_prox(y, c, pd, q, w1, lo, hi);
    };
    p.theta.evaluate = [pd, q, w1](const Vector& x) {
        double val = w1 * x.lpNorm<1>();
        if (pd.size()) val += 0.5 * x.dot(pd.cwiseProduct(x));
        if (q.size()) val += q.dot(x);
        return val;
    };
    return p;
}

/// min 1/2 x^2 s.t. x >= 1; saddle point (x*, lambda*) = (1, 1).
inline ProblemSpec p1() {
    ThetaSpec theta;
    theta.kind = ThetaSpec::Kind::Quadratic;
    theta.P = Matrix::Identity(1, 1);
    return build_qp_problem(theta, SetSpec{}, Matrix::Ones(1, 1), Vector::Ones(1), "p1");
}

/// min |x| s.t. x >= 0.5; saddle point (0.5, 1).
inline ProblemSpec p2() {
    ThetaSpec theta;
    theta.kind = ThetaSpec::Kind::L1;
    return build_qp_problem(theta, SetSpec{}, Matrix::Ones(1, 1), Vector::Constant(1, 0.5), "p2");
}

/// Strictly feasible random QP: theta = 1/2 x^T diag(p) x + q^T x with
/// p in [0.5, 2], Gaussian A, and b = A x0 - s for a positive slack s, so a
/// strictly feasible point exists and the solution is unique.
inline ProblemSpec random_strict_qp(std::uint64_t seed) {
    CounterRng rng(seed, /*stream=*/0x9b);
    const Index n = 1 + static_cast<Index>(rng.next_u64() % 10);
    const Index m = 1 + static_cast<Index>(rng.next_u64() % 10);
    Vector pdiag(n), q(n);
    for (Index i = 0; i < n; ++i) {
        pdiag[i] = rng.next_uniform(0.5, 2.0);
        q[i] = rng.next_uniform(-1.0, 1.0);
    }
    Matrix A(m, n);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) A(i, j) = rng.next_gaussian();
    Vector x0(n);
    for (Index i = 0; i < n; ++i) x0[i] = rng.next_gaussian();
    Vector slack(m);
    for (Index i = 0; i < m; ++i) slack[i] = rng.next_uniform(0.1, 1.0);
    Vector b = A * x0 - slack;

    ThetaSpec theta;
    theta.kind = ThetaSpec::Kind::Quadratic;
    theta.P = Matrix(pdiag.asDiagonal());
    theta.q = q;
    return build_qp_problem(theta, SetSpec{}, std::move(A), std::move(b),
                            "qp_seed" + std::to_string(seed));
}

/// P1, P2 and twenty seeded strictly feasible QPs: the instances every
/// per-iteration certification run covers.
inline std::vector<ProblemSpec> certification_suite() {
    std::vector<ProblemSpec> suite;
    suite.push_back(p1());
    suite.push_back(p2());
    for (std::uint64_t seed = 1; seed <= 20; ++seed) suite.push_back(random_strict_qp(seed));
    return suite;
}

}  // namespace ineqalm::qp
