#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "ineqalm/rng.hpp"
#include "ineqalm/solvers.hpp"

namespace ineqalm::svm {

/// Labeled training set; labels are +-1 and both classes must be present for
/// a well-posed margin.
struct SvmDataset {
    Matrix points;               // one sample per row
    Eigen::VectorXi labels;      // +-1

    Index count() const { return points.rows(); }
    Index dim() const { return points.cols(); }
};

inline void validate(const SvmDataset& data) {
    if (data.points.rows() != data.labels.size())
        throw std::invalid_argument("SvmDataset: points/labels count mismatch");
    if (data.count() == 0) throw std::invalid_argument("SvmDataset: empty dataset");
    bool pos = false, neg = false;
    for (Index i = 0; i < data.labels.size(); ++i) {
        if (data.labels[i] == 1) pos = true;
        else if (data.labels[i] == -1) neg = true;
        else throw std::invalid_argument("SvmDataset: labels must be +-1");
    }
    if (!pos || !neg) throw std::invalid_argument("SvmDataset: both classes must be non-empty");
}

struct SvmModel {
    Vector w;
    double a = 0.0;
    double margin() const { return 2.0 / w.norm(); }
    double decision(const Vector& x) const { return w.dot(x) + a; }
};

/// Maximum-margin hyperplane as a constrained program over u = (w; a):
/// min 1/2 ||Hu||^2 with H = blockdiag(I_n, 0), one constraint row
/// y_i (x_i^T, 1) per sample, b = 1, X the whole space. The prox of theta is
/// the diagonal quadratic prox, so the linearized x-update is closed-form.
inline ProblemSpec build_svm_problem(const SvmDataset& data) {
    validate(data);
    const Index n = data.dim(), m = data.count();
    Matrix A(m, n + 1);
    for (Index i = 0; i < m; ++i) {
        A.row(i).head(n) = data.labels[i] * data.points.row(i);
        A(i, n) = data.labels[i];
    }
    Vector hh = Vector::Ones(n + 1);
    hh[n] = 0.0;  // the intercept is unpenalized

    ProblemSpec p;
    p.n = n + 1;
    p.m = m;
    p.A = dense_operator(std::move(A));
    p.b = Vector::Ones(m);
    p.X = whole_space();
    p.theta = prox_of_quadratic(Matrix(hh.asDiagonal()));
    p.name = "svm_m" + std::to_string(m);
    return p;
}

/// Closed-form x-update u+ = (H^T H + tau r I)^{-1} (A^T lambda_tilde + tau r u):
/// the first n components divide by (1 + tau r), the intercept by tau r.
inline Vector svm_x_update(const Vector& u, const Vector& lambda_tilde, double tau_r,
                           const LinearOperator& A) {
    if (!(tau_r > 0.0)) throw std::invalid_argument("svm_x_update: tau_r must be positive");
    Vector rhs = A.apply_adjoint(lambda_tilde) + tau_r * u;
    const Index n = rhs.size() - 1;
    rhs.head(n) /= 1.0 + tau_r;
    rhs[n] /= tau_r;
    return rhs;
}

/// Perceptron-based separability certificate: convergence produces a strictly
/// separating hyperplane, which is verified before accepting. Exceeding the
/// update cap is treated as non-separable.
inline bool is_linearly_separable(const SvmDataset& data, long update_cap = 100000) {
    const Index m = data.count();
    Vector w = Vector::Zero(data.dim());
    double a = 0.0;
    long updates = 0;
    while (updates < update_cap) {
        bool clean = true;
        for (Index i = 0; i < m; ++i) {
            const double y = data.labels[i];
            if (y * (w.dot(data.points.row(i)) + a) <= 0.0) {
                w += y * data.points.row(i).transpose();
                a += y;
                clean = false;
                ++updates;
            }
        }
        if (clean) {
            for (Index i = 0; i < m; ++i)
                if (data.labels[i] * (w.dot(data.points.row(i)) + a) <= 0.0) return false;
            return true;
        }
    }
    return false;
}

/// Two Gaussian clouds centered at +-separation/2 along the first axis with
/// unit variance. Non-separable draws retry with the next seed, at most ten
/// times.
inline SvmDataset generate_gaussian_dataset(Index n_per_class, Index dim, double separation,
                                            std::uint64_t seed) {
    if (n_per_class < 1 || dim < 1)
        throw std::invalid_argument("generate_gaussian_dataset: degenerate shape");
    for (int attempt = 0; attempt <= 10; ++attempt) {
        CounterRng rng(seed + static_cast<std::uint64_t>(attempt), /*stream=*/0x51a);
        SvmDataset data;
        data.points.resize(2 * n_per_class, dim);
        data.labels.resize(2 * n_per_class);
        for (Index i = 0; i < 2 * n_per_class; ++i) {
            const int label = i < n_per_class ? 1 : -1;
            data.labels[i] = label;
            for (Index j = 0; j < dim; ++j) data.points(i, j) = rng.next_gaussian();
            data.points(i, 0) += label * separation / 2.0;
        }
        if (is_linearly_separable(data)) return data;
    }
    throw std::runtime_error(
        "generate_gaussian_dataset: no separable draw in 10 retries; increase separation");
}

struct SvmTrainResult {
    SvmModel model;
    SolveResult solve;
    double r_used = 0.0;
};

inline SolverConfig default_svm_config() {
    SolverConfig c;
    c.beta = 0.01;
    return c;
}

/// Trains with the closed-form linearized iteration. Defaults follow the
/// experiment settings: beta = 0.01 and r = beta rho(A^T A) + 0.1 (the
/// spectral radius is estimated by power iteration); the stopping metric is
/// the primal step norm.
inline SvmTrainResult train_svm(const SvmDataset& data, SolverConfig cfg = default_svm_config(),
                                const Observer& observer = {}) {
    const ProblemSpec p = build_svm_problem(data);
    auto warnings = validate(cfg);
    if (!cfg.r) {
        const SpectralEstimate est = estimate_spectral_radius(p.A);
        if (!est.converged) warnings.push_back("power iteration hit max_iter on the SVM operator");
        cfg.r = cfg.beta * est.value + 0.1;
    }
    cfg.stopping_rule = StoppingRule::AbsoluteStep;

    const double tau_r = cfg.tau * *cfg.r;
    StepFn fn = [tau_r](const ProblemSpec& pp, const SolverConfig& c, const PrimalDualPoint& w) {
        StepResult s;
        s.predictor.lambda_tilde = project_nonneg(w.lambda - c.beta * (pp.A.apply(w.x) - pp.b));
        s.next.x = svm_x_update(w.x, s.predictor.lambda_tilde, tau_r, pp.A);
        s.predictor.x_tilde = s.next.x;
        s.next.lambda = s.predictor.lambda_tilde + c.beta * pp.A.apply(w.x - s.next.x);
        return s;
    };

    SvmTrainResult out;
    out.r_used = *cfg.r;
    out.solve = solve_with_step(p, cfg, default_start(p), fn, observer, std::move(warnings));
    out.model.w = out.solve.final.x.head(p.n - 1);
    out.model.a = out.solve.final.x[p.n - 1];
    return out;
}

/// Fraction of samples with y_i (w^T x_i + a) >= 1 - tol_feas.
inline double margin_feasibility(const SvmDataset& data, const SvmModel& model,
                                 double tol_feas = 1e-4) {
    long ok = 0;
    for (Index i = 0; i < data.count(); ++i)
        if (data.labels[i] * model.decision(data.points.row(i)) >= 1.0 - tol_feas) ++ok;
    return static_cast<double>(ok) / static_cast<double>(data.count());
}

}  // namespace ineqalm::svm
