#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ineqalm/operators.hpp"

namespace ineqalm {

/// Constrained problem min { theta(x) | A x >= b, x in X }. The multiplier
/// orthant of the feasible region Omega = X x R_+^m is implicit. theta.prox
/// must solve the proximal subproblem over X (combined-prox contract).
struct ProblemSpec {
    Index n = 0;  // primal dimension
    Index m = 0;  // constraint rows
    ProxFunction theta;
    ProjectionSet X;
    LinearOperator A;
    Vector b;
    std::string name;
};

inline void validate_dimensions(const ProblemSpec& p) {
    if (p.A.rows != p.m || p.A.cols != p.n || p.b.size() != p.m)
        throw std::invalid_argument("ProblemSpec: A is " + std::to_string(p.A.rows) + "x" +
                                    std::to_string(p.A.cols) + ", b has " +
                                    std::to_string(p.b.size()) + ", expected m=" +
                                    std::to_string(p.m) + ", n=" + std::to_string(p.n));
}

enum class StoppingRule { AbsoluteStep, NormalizedStep, KktResidual };

inline const char* to_string(StoppingRule r) {
    switch (r) {
        case StoppingRule::AbsoluteStep: return "absolute_step";
        case StoppingRule::NormalizedStep: return "normalized_step";
        case StoppingRule::KktResidual: return "kkt_residual";
    }
    return "unknown";
}

/// Solver parameters. r is the proximal scalar; when unset it resolves to
/// beta * rho_hat * (1 + margin). The proven tau range is the closed interval
/// [0.75, 1]; values outside it are accepted with a recorded warning so the
/// solver can be driven into divergence studies deliberately.
struct SolverConfig {
    double beta = 1.0;
    double tau = 0.8;
    std::optional<double> r;
    double margin = 0.01;
    double delta = 0.3;  // extra regularization of the subproblem-form scheme
    double tol = 1e-6;
    long max_iter = 100000;
    StoppingRule stopping_rule = StoppingRule::AbsoluteStep;
};

/// Hard-validates the config and returns warnings for soft violations.
inline std::vector<std::string> validate(const SolverConfig& cfg) {
    if (!(cfg.beta > 0.0)) throw std::invalid_argument("SolverConfig: beta must be positive");
    if (cfg.r && !(*cfg.r > 0.0)) throw std::invalid_argument("SolverConfig: r must be positive");
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("SolverConfig: tol must be positive");
    if (cfg.max_iter < 0) throw std::invalid_argument("SolverConfig: max_iter must be >= 0");
    if (!(cfg.margin > 0.0)) throw std::invalid_argument("SolverConfig: margin must be positive");
    std::vector<std::string> warnings;
    if (cfg.tau < 0.75 || cfg.tau > 1.0)
        warnings.push_back("tau = " + std::to_string(cfg.tau) +
                           " is outside [0.75, 1]; convergence guarantee void");
    return warnings;
}

/// Resolves the proximal scalar against an available spectral-radius
/// estimate: auto mode returns beta * rho_hat * (1 + margin); an explicit r
/// must satisfy r > beta * rho_hat.
inline double resolve_r(const SolverConfig& cfg, double rho_hat) {
    if (!cfg.r) return cfg.beta * rho_hat * (1.0 + cfg.margin);
    if (*cfg.r <= cfg.beta * rho_hat)
        throw std::invalid_argument("SolverConfig: r = " + std::to_string(*cfg.r) +
                                    " violates r > beta*rho(A^T A) = " +
                                    std::to_string(cfg.beta * rho_hat));
    return *cfg.r;
}

// ---------------------------------------------------------------------------
// Iterates
// ---------------------------------------------------------------------------

/// Joint iterate w = (x; lambda). The corrected multiplier carries no sign
/// restriction; only the predictor is projected.
struct PrimalDualPoint {
    Vector x;
    Vector lambda;
};

/// Predictor pair (x_tilde, lambda_tilde); lambda_tilde >= 0 componentwise.
struct PredictorPoint {
    Vector x_tilde;
    Vector lambda_tilde;
};

inline PrimalDualPoint default_start(const ProblemSpec& p) {
    return {p.X.project(Vector::Zero(p.n)), Vector::Zero(p.m)};
}

// ---------------------------------------------------------------------------
// Residuals and stopping metrics
// ---------------------------------------------------------------------------

/// F(w) = (-A^T lambda; A x - b); affine with skew-symmetric linear part.
inline Vector eval_F(const ProblemSpec& p, const PrimalDualPoint& w) {
    validate_dimensions(p);
    if (w.x.size() != p.n || w.lambda.size() != p.m)
        throw std::invalid_argument("eval_F: point dimension mismatch");
    Vector out(p.n + p.m);
    out.head(p.n) = -p.A.apply_adjoint(w.lambda);
    out.tail(p.m) = p.A.apply(w.x) - p.b;
    return out;
}

struct KktResiduals {
    double primal_infeasibility = 0.0;  // ||[b - Ax]_+||_inf
    double multiplier_negativity = 0.0; // ||[-lambda]_+||_inf
    double complementarity = 0.0;       // |lambda^T (Ax - b)|
    double stationarity = 0.0;          // unit-weight prox fixed-point gap

    double max() const {
        return std::max(std::max(primal_infeasibility, multiplier_negativity),
                        std::max(complementarity, stationarity));
    }
};

/// All four residuals vanish exactly at a saddle point. The stationarity
/// residual is ||x - argmin_z { theta(z) - lambda^T A z + 1/2 ||z - x||^2 }||,
/// one x-update with unit proximal weight.
inline KktResiduals kkt_residuals(const ProblemSpec& p, const PrimalDualPoint& w) {
    if (w.x.size() != p.n || w.lambda.size() != p.m)
        throw std::invalid_argument("kkt_residuals: point dimension mismatch");
    KktResiduals res;
    const Vector slack = p.A.apply(w.x) - p.b;
    res.primal_infeasibility = project_nonneg(-slack).lpNorm<Eigen::Infinity>();
    res.multiplier_negativity = project_nonneg(-w.lambda).lpNorm<Eigen::Infinity>();
    res.complementarity = std::abs(w.lambda.dot(slack));
    const Vector z = p.theta.prox(w.x + p.A.apply_adjoint(w.lambda), 1.0);
    res.stationarity = (w.x - z).norm();
    return res;
}

/// Stopping metric Aer(k) = ||x_next - x_prev|| (primal step only).
inline double aer_absolute(const PrimalDualPoint& prev, const PrimalDualPoint& next) {
    return (next.x - prev.x).norm();
}

/// Stopping metric Aer(k) = ||u_tilde - u|| / (number of scalar entries).
inline double aer_normalized(const Vector& u_tilde, const Vector& u) {
    if (u.size() == 0) throw std::invalid_argument("aer_normalized: empty field");
    if (u_tilde.size() != u.size())
        throw std::invalid_argument("aer_normalized: shape mismatch");
    return (u_tilde - u).norm() / static_cast<double>(u.size());
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

struct IterationTrace {
    long k = 0;
    double aer = 0.0;
    double primal_infeasibility = 0.0;
    double complementarity = 0.0;
    double multiplier_negativity = 0.0;
    std::optional<double> objective;
    double step_x = 0.0;
    double step_lambda = 0.0;
    // certification extras, filled only by certified runs
    std::optional<double> phi;
    std::optional<double> varphi;
    std::optional<bool> inner_converged;  // schemes with inner loops only
};

enum class SolveStatus { Converged, MaxIterReached, NumericalFailure };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "Converged";
        case SolveStatus::MaxIterReached: return "MaxIterReached";
        case SolveStatus::NumericalFailure: return "NumericalFailure";
    }
    return "unknown";
}

struct SolveResult {
    PrimalDualPoint final;
    SolveStatus status = SolveStatus::MaxIterReached;
    long iterations = 0;
    std::vector<IterationTrace> traces;
    std::vector<std::string> warnings;
};

}  // namespace ineqalm
