#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "ineqalm/problem.hpp"

namespace ineqalm {

enum class Scheme { IIDL, ClassicIneq, EqualityIDL, IndefiniteALM };

inline const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::IIDL: return "iidl";
        case Scheme::ClassicIneq: return "classic";
        case Scheme::EqualityIDL: return "equality";
        case Scheme::IndefiniteALM: return "indefinite";
    }
    return "unknown";
}

struct StepResult {
    PrimalDualPoint next;
    PredictorPoint predictor;
    bool inner_converged = true;
};

namespace detail {
inline double require_r(const SolverConfig& cfg) {
    if (!cfg.r) throw std::invalid_argument("step: config.r must be resolved before stepping");
    return *cfg.r;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Linearized schemes (one proximity evaluation per iteration)
// ---------------------------------------------------------------------------

/// Inequality-constrained indefinite linearized ALM step:
///   lambda_tilde = [lambda - beta (A x - b)]_+
///   x+  = argmin { theta(z) - lambda_tilde^T A z + tau r / 2 ||z - x||^2 : z in X }
///   lambda+ = lambda_tilde + beta A (x - x+)
/// The x-update is the prox of theta at x + A^T lambda_tilde / (tau r).
inline StepResult i_idl_alm_step(const ProblemSpec& p, const SolverConfig& cfg,
                                 const PrimalDualPoint& w) {
    const double tau_r = cfg.tau * detail::require_r(cfg);
    StepResult out;
    out.predictor.lambda_tilde = project_nonneg(w.lambda - cfg.beta * (p.A.apply(w.x) - p.b));
    out.next.x = p.theta.prox(w.x + p.A.apply_adjoint(out.predictor.lambda_tilde) / tau_r, 1.0 / tau_r);
    out.predictor.x_tilde = out.next.x;
    out.next.lambda = out.predictor.lambda_tilde + cfg.beta * p.A.apply(w.x - out.next.x);
    return out;
}

/// Equality-style variant: identical except the predicted multiplier is not
/// projected onto the orthant.
inline StepResult equality_idl_alm_step(const ProblemSpec& p, const SolverConfig& cfg,
                                        const PrimalDualPoint& w) {
    const double tau_r = cfg.tau * detail::require_r(cfg);
    StepResult out;
    out.predictor.lambda_tilde = w.lambda - cfg.beta * (p.A.apply(w.x) - p.b);
    out.next.x = p.theta.prox(w.x + p.A.apply_adjoint(out.predictor.lambda_tilde) / tau_r, 1.0 / tau_r);
    out.predictor.x_tilde = out.next.x;
    out.next.lambda = out.predictor.lambda_tilde + cfg.beta * p.A.apply(w.x - out.next.x);
    return out;
}

// ---------------------------------------------------------------------------
// Inner accelerated proximal gradient, shared by the subproblem-form schemes
// ---------------------------------------------------------------------------

struct InnerResult {
    Vector x;
    bool converged = false;
    long iterations = 0;
};

/// FISTA with fixed step 1/L on min f(x) + g(x); stops when the composite
/// gradient mapping L ||y - prox(y - grad/L)|| falls below tol.
inline InnerResult accelerated_prox_gradient(const std::function<Vector(const Vector&)>& grad_f,
                                             double lipschitz, const ProxFunction& g, Vector x0,
                                             double tol, long budget) {
    if (!(lipschitz > 0.0))
        throw std::invalid_argument("accelerated_prox_gradient: Lipschitz constant must be positive");
    InnerResult res;
    Vector x = std::move(x0);
    Vector y = x;
    double t = 1.0;
    for (long it = 1; it <= budget; ++it) {
        const Vector x_new = g.prox(y - grad_f(y) / lipschitz, 1.0 / lipschitz);
        res.iterations = it;
        if (lipschitz * (y - x_new).norm() <= tol) {
            res.x = x_new;
            res.converged = true;
            return res;
        }
        const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = x_new + ((t - 1.0) / t_new) * (x_new - x);
        x = x_new;
        t = t_new;
    }
    res.x = x;
    return res;
}

/// Classic inequality-ALM step. The x-subproblem minimizes
///   theta(x) + 1/(2 beta) ||[lambda - beta (A x - b)]_+||^2
/// over X; its smooth part has gradient -A^T [lambda - beta (A x - b)]_+ with
/// Lipschitz constant beta * rho(A^T A), so it is handled by an inner
/// accelerated proximal-gradient loop warm-started at x.
inline PrimalDualPoint inequality_alm_step(const ProblemSpec& p, const SolverConfig& cfg,
                                           const PrimalDualPoint& w, long inner_budget,
                                           double inner_tol, double rho_hat,
                                           bool* inner_converged = nullptr) {
    if (inner_budget < 1) throw std::invalid_argument("inequality_alm_step: inner_budget must be >= 1");
    auto grad = [&](const Vector& x) -> Vector {
        return -p.A.apply_adjoint(project_nonneg(w.lambda - cfg.beta * (p.A.apply(x) - p.b)));
    };
    InnerResult inner = accelerated_prox_gradient(grad, cfg.beta * rho_hat, p.theta, w.x,
                                                  inner_tol, inner_budget);
    if (inner_converged) *inner_converged = inner.converged;
    PrimalDualPoint next;
    next.x = std::move(inner.x);
    next.lambda = project_nonneg(w.lambda - cfg.beta * (p.A.apply(next.x) - p.b));
    return next;
}

/// Inner minimizer contract for the subproblem-form indefinite scheme:
/// solves argmin { theta(z) - lambda_tilde^T A z
///                 + (tau + delta) beta / 2 ||A (z - x)||^2 : z in X }.
using XSubsolver = std::function<Vector(const ProblemSpec&, const SolverConfig&,
                                        const Vector& lambda_tilde, const Vector& x)>;

inline XSubsolver make_default_x_subsolver(double rho_hat, double inner_tol = 1e-12,
                                           long inner_budget = 20000) {
    return [rho_hat, inner_tol, inner_budget](const ProblemSpec& p, const SolverConfig& cfg,
                                              const Vector& lambda_tilde, const Vector& x) {
        auto grad = [&](const Vector& z) -> Vector {
            return -p.A.apply_adjoint(lambda_tilde) +
                   (cfg.tau + cfg.delta) * cfg.beta * p.A.apply_adjoint(p.A.apply(z - x));
        };
        InnerResult inner = accelerated_prox_gradient(grad, (cfg.tau + cfg.delta) * cfg.beta * rho_hat,
                                                      p.theta, x, inner_tol, inner_budget);
        if (!inner.converged)
            throw std::runtime_error("indefinite_alm_step: inner minimizer did not converge");
        return inner.x;
    };
}

/// Indefinite ALM in subproblem form, for when rho(A^T A) is hard to
/// estimate: the proximal term (tau + delta) beta / 2 ||A (z - x)||^2 replaces
/// the linearized tau r / 2 ||z - x||^2.
inline StepResult indefinite_alm_step(const ProblemSpec& p, const SolverConfig& cfg,
                                      const PrimalDualPoint& w, const XSubsolver& x_subsolver) {
    if (!(cfg.delta > 0.0)) throw std::invalid_argument("indefinite_alm_step: delta must be positive");
    StepResult out;
    out.predictor.lambda_tilde = project_nonneg(w.lambda - cfg.beta * (p.A.apply(w.x) - p.b));
    out.next.x = x_subsolver(p, cfg, out.predictor.lambda_tilde, w.x);
    out.predictor.x_tilde = out.next.x;
    out.next.lambda = out.predictor.lambda_tilde + cfg.beta * p.A.apply(w.x - out.next.x);
    return out;
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Per-iteration callback; runs before the trace row is stored, and may
/// annotate it (the certified runner fills the potential fields this way).
using Observer = std::function<void(IterationTrace&, const PrimalDualPoint& next,
                                    const PredictorPoint& predictor)>;
using StepFn = std::function<StepResult(const ProblemSpec&, const SolverConfig&,
                                        const PrimalDualPoint&)>;

struct SolveSetup {
    SolverConfig cfg;  // r resolved
    double rho_hat = std::numeric_limits<double>::quiet_NaN();  // NaN when not estimated
    std::vector<std::string> warnings;
};

/// Validates the config and resolves r. The spectral radius is estimated only
/// when actually needed (auto r, or a scheme whose inner loop needs the
/// Lipschitz constant); when it is available, explicit r <= beta * rho is
/// rejected.
inline SolveSetup prepare(const ProblemSpec& p, SolverConfig cfg, Scheme scheme) {
    validate_dimensions(p);
    SolveSetup setup;
    setup.warnings = validate(cfg);
    const bool need_rho = !cfg.r.has_value() || scheme == Scheme::ClassicIneq ||
                          scheme == Scheme::IndefiniteALM;
    if (need_rho) {
        SpectralEstimate est = estimate_spectral_radius(p.A);
        if (!est.converged)
            setup.warnings.push_back("spectral-radius power iteration hit max_iter; using last estimate");
        setup.rho_hat = est.value;
        cfg.r = resolve_r(cfg, est.value);
    }
    setup.cfg = cfg;
    return setup;
}

namespace detail {

inline bool finite_point(const PrimalDualPoint& w) {
    return w.x.allFinite() && w.lambda.allFinite();
}

constexpr double kDivergenceGuard = 1e12;

}  // namespace detail

/// Iterates an arbitrary step function under the configured stopping rule,
/// recording one trace row per iteration. Non-finite iterates or norms past
/// the divergence guard end the run as NumericalFailure at the last good
/// point.
inline SolveResult solve_with_step(const ProblemSpec& p, const SolverConfig& cfg,
                                   const PrimalDualPoint& w0, const StepFn& step,
                                   const Observer& observer = {},
                                   std::vector<std::string> warnings = {}) {
    if (w0.x.size() != p.n || w0.lambda.size() != p.m)
        throw std::invalid_argument("solve: w0 dimension mismatch");
    SolveResult result;
    result.warnings = std::move(warnings);
    result.final = w0;
    result.status = SolveStatus::MaxIterReached;

    PrimalDualPoint w = w0;
    for (long k = 0; k < cfg.max_iter; ++k) {
        StepResult s;
        try {
            s = step(p, cfg, w);
        } catch (const std::runtime_error&) {
            result.status = SolveStatus::NumericalFailure;
            break;
        }
        if (!detail::finite_point(s.next) ||
            std::max(s.next.x.lpNorm<Eigen::Infinity>(),
                     s.next.lambda.lpNorm<Eigen::Infinity>()) > detail::kDivergenceGuard) {
            result.status = SolveStatus::NumericalFailure;
            break;
        }

        IterationTrace tr;
        tr.k = k;
        tr.step_x = (s.next.x - w.x).norm();
        tr.step_lambda = (s.next.lambda - w.lambda).norm();
        const KktResiduals kkt = kkt_residuals(p, s.next);
        tr.primal_infeasibility = kkt.primal_infeasibility;
        tr.complementarity = kkt.complementarity;
        tr.multiplier_negativity = kkt.multiplier_negativity;
        if (p.theta.evaluate) tr.objective = p.theta.evaluate(s.next.x);
        if (!s.inner_converged) tr.inner_converged = false;
        switch (cfg.stopping_rule) {
            case StoppingRule::AbsoluteStep: tr.aer = tr.step_x; break;
            case StoppingRule::NormalizedStep:
                tr.aer = aer_normalized(s.predictor.lambda_tilde, w.lambda);
                break;
            case StoppingRule::KktResidual: tr.aer = kkt.max(); break;
        }
        if (observer) observer(tr, s.next, s.predictor);
        result.traces.push_back(tr);

        w = s.next;
        result.final = w;
        result.iterations = k + 1;
        if (tr.aer < cfg.tol) {
            result.status = SolveStatus::Converged;
            break;
        }
    }
    return result;
}

/// Runs the selected scheme from w0.
inline SolveResult solve(const ProblemSpec& p, const SolverConfig& cfg_in, const PrimalDualPoint& w0,
                         Scheme scheme, const Observer& observer = {}) {
    SolveSetup setup = prepare(p, cfg_in, scheme);
    StepFn fn;
    switch (scheme) {
        case Scheme::IIDL:
            fn = [](const ProblemSpec& pp, const SolverConfig& c, const PrimalDualPoint& w) {
                return i_idl_alm_step(pp, c, w);
            };
            break;
        case Scheme::EqualityIDL:
            fn = [](const ProblemSpec& pp, const SolverConfig& c, const PrimalDualPoint& w) {
                return equality_idl_alm_step(pp, c, w);
            };
            break;
        case Scheme::ClassicIneq:
            fn = [rho = setup.rho_hat](const ProblemSpec& pp, const SolverConfig& c,
                                       const PrimalDualPoint& w) {
                StepResult s;
                s.next = inequality_alm_step(pp, c, w, 10000, 1e-10, rho, &s.inner_converged);
                s.predictor = {s.next.x, s.next.lambda};
                return s;
            };
            break;
        case Scheme::IndefiniteALM:
            fn = [sub = make_default_x_subsolver(setup.rho_hat)](const ProblemSpec& pp,
                                                                 const SolverConfig& c,
                                                                 const PrimalDualPoint& w) {
                return indefinite_alm_step(pp, c, w, sub);
            };
            break;
    }
    return solve_with_step(p, setup.cfg, w0, fn, observer, setup.warnings);
}

}  // namespace ineqalm
