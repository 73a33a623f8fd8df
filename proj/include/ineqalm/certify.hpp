#pragma once

#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ineqalm/qp.hpp"
#include "ineqalm/solvers.hpp"

namespace ineqalm::certify {

/// Dense analysis objects of one scheme instance. For the linearized scheme
///   Q = [tau r I, 0; -A, I/beta],  M = [I, 0; -beta A, I],
///   H = Q M^{-1} = blockdiag(tau r I, I/beta),
///   G = Q^T + Q - M^T H M = blockdiag(D0, I/beta),
///   D = r I - beta A^T A,  D0 = tau r I - beta A^T A = tau D - (1-tau) beta A^T A.
/// The subproblem-form indefinite scheme swaps the (1,1) blocks:
///   Q11 = (tau+delta) beta A^T A, H11 = Q11, D = delta beta A^T A / tau,
///   D0 = (delta - (1-tau)) beta A^T A.
struct CertMatrices {
    Scheme scheme = Scheme::IIDL;
    Index n = 0, m = 0;
    Matrix A;  // the dense constraint matrix the blocks were assembled from
    Matrix Q, M, H, G, D, D0;
};

struct PotentialRecord {
    double phi = 0.0;      // 1/2 { tau ||dx||_D^2 + (1-tau) beta ||A dx||^2 }
    double varphi = 0.0;   // tau ||dx||_D^2 + 2 (tau - 3/4) { beta ||A dx||^2 + ||dl||^2 / beta }
    double h_distance_sq = std::numeric_limits<double>::quiet_NaN();  // ||w_k - w*||_H^2
};

/// One verified identity or inequality. Inequality checks are oriented as
/// lhs >= rhs, so pass means slack >= -tol; identities pass when |slack| <= tol.
struct CheckReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    long iteration = -1;
};

namespace detail {

inline double quad_form(const Matrix& S, const Vector& v) { return v.dot(S * v); }

inline Vector stack(const Vector& x, const Vector& lambda) {
    Vector w(x.size() + lambda.size());
    w << x, lambda;
    return w;
}

inline CheckReport inequality_report(std::string name, double lhs, double rhs, long k) {
    CheckReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.slack = lhs - rhs;
    r.tolerance = 1e-9 * (1.0 + std::abs(lhs) + std::abs(rhs));
    r.pass = r.slack >= -r.tolerance;
    r.iteration = k;
    return r;
}

inline CheckReport identity_report(std::string name, double lhs, double rhs, long k) {
    CheckReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.slack = lhs - rhs;
    r.tolerance = 1e-9 * (1.0 + std::abs(lhs));
    r.pass = std::abs(r.slack) <= r.tolerance;
    r.iteration = k;
    return r;
}

inline void require_entrywise(const Matrix& got, const Matrix& want, const char* what) {
    const double scale = 1.0 + std::max(got.cwiseAbs().maxCoeff(), want.cwiseAbs().maxCoeff());
    if ((got - want).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw std::runtime_error(std::string("assemble_matrices: ") + what +
                                 " disagrees with its block closed form");
}

}  // namespace detail

/// Builds Q, M, H, G, D, D0 for a small instance and cross-checks the block
/// closed forms against H = Q M^{-1} and G = Q^T + Q - M^T H M entrywise.
inline CertMatrices assemble_matrices(const Matrix& A, const SolverConfig& cfg, Scheme scheme) {
    const Index m = A.rows(), n = A.cols();
    if (n + m > 2000) throw std::invalid_argument("assemble_matrices: size guard n + m <= 2000 exceeded");
    if (scheme != Scheme::IIDL && scheme != Scheme::EqualityIDL && scheme != Scheme::IndefiniteALM)
        throw std::invalid_argument("assemble_matrices: no certification form for this scheme");

    CertMatrices cert;
    cert.scheme = scheme == Scheme::IndefiniteALM ? Scheme::IndefiniteALM : Scheme::IIDL;
    cert.n = n;
    cert.m = m;
    cert.A = A;
    const Matrix AtA = A.transpose() * A;
    const double beta = cfg.beta, tau = cfg.tau;

    Matrix q11;
    if (cert.scheme == Scheme::IIDL) {
        const double r = cfg.r ? *cfg.r : throw std::invalid_argument("assemble_matrices: r unresolved");
        q11 = cfg.tau * r * Matrix::Identity(n, n);
        cert.D = r * Matrix::Identity(n, n) - beta * AtA;
    } else {
        if (!(cfg.delta > 0.0)) throw std::invalid_argument("assemble_matrices: delta must be positive");
        q11 = (tau + cfg.delta) * beta * AtA;
        cert.D = (cfg.delta / tau) * beta * AtA;
    }
    cert.D0 = q11 - beta * AtA;  // = tau D - (1 - tau) beta A^T A in both forms

    cert.Q = Matrix::Zero(n + m, n + m);
    cert.Q.topLeftCorner(n, n) = q11;
    cert.Q.bottomLeftCorner(m, n) = -A;
    cert.Q.bottomRightCorner(m, m) = Matrix::Identity(m, m) / beta;

    cert.M = Matrix::Identity(n + m, n + m);
    cert.M.bottomLeftCorner(m, n) = -beta * A;

    cert.H = Matrix::Zero(n + m, n + m);
    cert.H.topLeftCorner(n, n) = q11;
    cert.H.bottomRightCorner(m, m) = Matrix::Identity(m, m) / beta;

    cert.G = Matrix::Zero(n + m, n + m);
    cert.G.topLeftCorner(n, n) = cert.D0;
    cert.G.bottomRightCorner(m, m) = Matrix::Identity(m, m) / beta;

    // M is unit lower triangular, so M^{-1} = [I, 0; beta A, I] exactly.
    Matrix Minv = Matrix::Identity(n + m, n + m);
    Minv.bottomLeftCorner(m, n) = beta * A;
    detail::require_entrywise(cert.Q * Minv, cert.H, "H = Q M^{-1}");
    detail::require_entrywise(cert.Q.transpose() + cert.Q - cert.M.transpose() * cert.H * cert.M,
                              cert.G, "G = Q^T + Q - M^T H M");
    return cert;
}

// ---------------------------------------------------------------------------
// Prediction-correction form
// ---------------------------------------------------------------------------

/// One iteration through the two-stage form: predictor from the scheme's
/// subproblems, then w+ = w - M (w - w_tilde) with M materialized. Must
/// reproduce the direct step exactly.
inline StepResult predict_correct_step(const ProblemSpec& p, const SolverConfig& cfg,
                                       const PrimalDualPoint& w) {
    if (!cfg.r) throw std::invalid_argument("predict_correct_step: r unresolved");
    const double tau_r = cfg.tau * *cfg.r;
    StepResult out;
    out.predictor.lambda_tilde = project_nonneg(w.lambda - cfg.beta * (p.A.apply(w.x) - p.b));
    out.predictor.x_tilde =
        p.theta.prox(w.x + p.A.apply_adjoint(out.predictor.lambda_tilde) / tau_r, 1.0 / tau_r);

    const Matrix A = p.A.materialize();
    Matrix M = Matrix::Identity(p.n + p.m, p.n + p.m);
    M.bottomLeftCorner(p.m, p.n) = -cfg.beta * A;
    const Vector wv = detail::stack(w.x, w.lambda);
    const Vector wt = detail::stack(out.predictor.x_tilde, out.predictor.lambda_tilde);
    const Vector next = wv - M * (wv - wt);
    out.next.x = next.head(p.n);
    out.next.lambda = next.tail(p.m);
    return out;
}

// ---------------------------------------------------------------------------
// Per-iteration checks
// ---------------------------------------------------------------------------

/// Three consecutive iterates around the step k -> k+1, with the predictor of
/// that step. The history-dependent bounds reference x^{k-1}, so checks start
/// at the second iteration.
struct IterateHistory {
    PrimalDualPoint w_prev;  // w^{k-1}
    PrimalDualPoint w_k;     // w^k
    PrimalDualPoint w_next;  // w^{k+1}
    PredictorPoint predictor;
    long k = 0;
};

/// phi and varphi of one transition, plus ||w_k - w*||_H^2 when a reference
/// is supplied. Both potentials are nonnegative whenever tau is in [0.75, 1]
/// and D is positive semidefinite.
inline PotentialRecord potential_terms(const PrimalDualPoint& w_k, const PrimalDualPoint& w_next,
                                       const CertMatrices& cert, const SolverConfig& cfg,
                                       const PrimalDualPoint* w_star = nullptr) {
    const Vector dx = w_k.x - w_next.x;
    const Vector dl = w_k.lambda - w_next.lambda;
    const double dx_d = detail::quad_form(cert.D, dx);
    const double adx = (cert.A * dx).squaredNorm();
    PotentialRecord rec;
    rec.phi = 0.5 * (cfg.tau * dx_d + (1.0 - cfg.tau) * cfg.beta * adx);
    rec.varphi = cfg.tau * dx_d +
                 2.0 * (cfg.tau - 0.75) * (cfg.beta * adx + dl.squaredNorm() / cfg.beta);
    if (w_star)
        rec.h_distance_sq = detail::quad_form(
            cert.H, detail::stack(w_k.x - w_star->x, w_k.lambda - w_star->lambda));
    return rec;
}

/// Identity: ||w^k - w_tilde^k||_G^2 equals
///   tau ||dx||_D^2 + tau beta ||A dx||^2 + ||dl||^2 / beta + 2 dl^T A dx
/// with dx = x^k - x^{k+1}, dl = lambda^k - lambda^{k+1}.
inline CheckReport check_identity_G(const CertMatrices& cert, const PrimalDualPoint& w_k,
                                    const PrimalDualPoint& w_next, const PredictorPoint& w_tilde,
                                    const SolverConfig& cfg, long k) {
    const double lhs = detail::quad_form(
        cert.G, detail::stack(w_k.x - w_tilde.x_tilde, w_k.lambda - w_tilde.lambda_tilde));
    const Vector dx = w_k.x - w_next.x;
    const Vector dl = w_k.lambda - w_next.lambda;
    const Vector adx = cert.A * dx;
    const double rhs = cfg.tau * detail::quad_form(cert.D, dx) +
                       cfg.tau * cfg.beta * adx.squaredNorm() + dl.squaredNorm() / cfg.beta +
                       2.0 * dl.dot(adx);
    return detail::identity_report("identity_G", lhs, rhs, k);
}

/// Two lower bounds on the cross term dl^T A dx: the history-dependent one
/// (phi-style terms at k and k-1) and the pointwise one
///   -(tau - 1/2) beta ||A dx||^2 - (5/2 - 2 tau) ||dl||^2 / beta.
inline std::array<CheckReport, 2> check_cross_term_bounds(const IterateHistory& h,
                                                          const CertMatrices& cert,
                                                          const SolverConfig& cfg) {
    const Vector dx = h.w_k.x - h.w_next.x;
    const Vector dx_prev = h.w_prev.x - h.w_k.x;
    const Vector dl = h.w_k.lambda - h.w_next.lambda;
    const Vector adx = cert.A * dx;
    const double cross = dl.dot(adx);
    const double tau = cfg.tau, beta = cfg.beta;

    const double adx2 = adx.squaredNorm();
    const double adx2_prev = (cert.A * dx_prev).squaredNorm();
    const double rhs_hist = 0.5 * tau * detail::quad_form(cert.D, dx) +
                            0.5 * (1.0 - tau) * beta * adx2 -
                            0.5 * tau * detail::quad_form(cert.D, dx_prev) -
                            0.5 * (1.0 - tau) * beta * adx2_prev - 2.0 * (1.0 - tau) * beta * adx2;
    const double rhs_point = -(tau - 0.5) * beta * adx2 - (2.5 - 2.0 * tau) * dl.squaredNorm() / beta;
    return {detail::inequality_report("cross_lower_bound_history", cross, rhs_hist, h.k),
            detail::inequality_report("cross_lower_bound_pointwise", cross, rhs_point, h.k)};
}

/// Descent: ||w^k - w_tilde^k||_G^2 >= [phi(k, k+1) - phi(k-1, k)] + varphi(k, k+1).
inline CheckReport check_descent(const IterateHistory& h, const CertMatrices& cert,
                                 const SolverConfig& cfg) {
    const double lhs = detail::quad_form(
        cert.G, detail::stack(h.w_k.x - h.predictor.x_tilde,
                              h.w_k.lambda - h.predictor.lambda_tilde));
    const PotentialRecord cur = potential_terms(h.w_k, h.w_next, cert, cfg);
    const PotentialRecord prev = potential_terms(h.w_prev, h.w_k, cert, cfg);
    return detail::inequality_report("descent", lhs, (cur.phi - prev.phi) + cur.varphi, h.k);
}

/// Contraction toward a reference solution, oriented as lhs >= rhs:
///   ||w^k - w*||_H^2 + phi(k-1, k) - varphi(k, k+1)
///     >= ||w^{k+1} - w*||_H^2 + phi(k, k+1).
inline CheckReport check_contraction(const IterateHistory& h, const PrimalDualPoint& w_star,
                                     const CertMatrices& cert, const SolverConfig& cfg) {
    const PotentialRecord cur = potential_terms(h.w_k, h.w_next, cert, cfg, &w_star);
    const PotentialRecord prev = potential_terms(h.w_prev, h.w_k, cert, cfg);
    const double next_dist = detail::quad_form(
        cert.H, detail::stack(h.w_next.x - w_star.x, h.w_next.lambda - w_star.lambda));
    return detail::inequality_report("contraction", cur.h_distance_sq + prev.phi - cur.varphi,
                                     next_dist + cur.phi, h.k);
}

/// Summability consequence: the running partial sum of varphi over k >= 1
/// stays bounded by the initial potential ||w^1 - w*||_H^2 + phi(w^0, w^1).
inline CheckReport check_phi_sum_bound(double partial_sum, double initial_potential, long k) {
    return detail::inequality_report("varphi_partial_sum", initial_potential, partial_sum, k);
}

// ---------------------------------------------------------------------------
// Spectrum
// ---------------------------------------------------------------------------

struct SpectrumReport {
    double h_min = 0, h_max = 0;
    double g_min = 0, g_max = 0;
    double d_min = 0, d_max = 0;
    double d0_min = 0, d0_max = 0;
    bool h_positive_definite = false;
    bool d_positive_semidefinite = false;
    bool d0_has_negative_eigenvalue = false;
    bool g_has_negative_eigenvalue = false;
};

inline SpectrumReport spectrum_report(const CertMatrices& cert) {
    auto extremes = [](const Matrix& S) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("spectrum_report: eigensolve failed");
        return std::pair<double, double>{es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
    };
    SpectrumReport rep;
    std::tie(rep.h_min, rep.h_max) = extremes(cert.H);
    std::tie(rep.g_min, rep.g_max) = extremes(cert.G);
    std::tie(rep.d_min, rep.d_max) = extremes(cert.D);
    std::tie(rep.d0_min, rep.d0_max) = extremes(cert.D0);
    const double tiny = 1e-12 * (1.0 + std::abs(rep.d_max));
    rep.h_positive_definite = rep.h_min > 0.0;
    rep.d_positive_semidefinite = rep.d_min >= -tiny;
    rep.d0_has_negative_eigenvalue = rep.d0_min < -tiny;
    rep.g_has_negative_eigenvalue = rep.g_min < -tiny;
    return rep;
}

// ---------------------------------------------------------------------------
// Certified runs
// ---------------------------------------------------------------------------

/// High-accuracy reference: the linearized scheme driven to KKT residual
/// 1e-12 under a tenfold budget, then validated at 1e-10.
inline PrimalDualPoint reference_solution(const ProblemSpec& p, const SolverConfig& cfg) {
    SolverConfig ref_cfg = cfg;
    ref_cfg.tol = 1e-12;
    ref_cfg.max_iter = 10 * std::max(cfg.max_iter, 100000L);
    ref_cfg.stopping_rule = StoppingRule::KktResidual;
    const SolveResult res = solve(p, ref_cfg, default_start(p), Scheme::IIDL);
    const double resid = kkt_residuals(p, res.final).max();
    if (resid > 1e-10)
        throw std::runtime_error("reference_solution: KKT residual " + std::to_string(resid) +
                                 " exceeds 1e-10 on " + p.name);
    return res.final;
}

struct CertifiedRun {
    SolveResult result;
    std::vector<CheckReport> reports;
    SpectrumReport spectrum;
    bool all_pass = true;
};

/// Runs the scheme on one problem with every per-iteration check attached:
/// the G-norm identity from the first step, and the bound/descent/contraction
/// inequalities plus the varphi partial-sum bound from the second step on.
inline CertifiedRun run_certified(const ProblemSpec& p, const SolverConfig& cfg_in, Scheme scheme,
                                  std::optional<PrimalDualPoint> w_star = {}) {
    if (scheme != Scheme::IIDL && scheme != Scheme::IndefiniteALM)
        throw std::invalid_argument("run_certified: certification covers the linearized and "
                                    "subproblem-form indefinite schemes");
    const SolveSetup setup = prepare(p, cfg_in, scheme);
    const CertMatrices cert = assemble_matrices(p.A.materialize(), setup.cfg, scheme);
    const PrimalDualPoint ref = w_star ? *w_star : reference_solution(p, setup.cfg);
    if (kkt_residuals(p, ref).max() > 1e-10)
        throw std::invalid_argument("run_certified: supplied w_star fails the residual check");

    StepFn fn;
    if (scheme == Scheme::IIDL) {
        fn = [](const ProblemSpec& pp, const SolverConfig& c, const PrimalDualPoint& w) {
            return i_idl_alm_step(pp, c, w);
        };
    } else {
        fn = [sub = make_default_x_subsolver(setup.rho_hat, 1e-13, 200000)](
                 const ProblemSpec& pp, const SolverConfig& c, const PrimalDualPoint& w) {
            return indefinite_alm_step(pp, c, w, sub);
        };
    }

    CertifiedRun out;
    struct State {
        bool have_prev = false;
        PrimalDualPoint w_prev, w_k;
        double partial_sum = 0.0;
        double initial_potential = std::numeric_limits<double>::quiet_NaN();
    } st;
    st.w_k = default_start(p);
    const PrimalDualPoint w0 = st.w_k;

    Observer obs = [&](IterationTrace& tr, const PrimalDualPoint& next, const PredictorPoint& pred) {
        const PotentialRecord pot = potential_terms(st.w_k, next, cert, setup.cfg, &ref);
        tr.phi = pot.phi;
        tr.varphi = pot.varphi;
        out.reports.push_back(check_identity_G(cert, st.w_k, next, pred, setup.cfg, tr.k));
        if (st.have_prev) {
            const IterateHistory hist{st.w_prev, st.w_k, next, pred, tr.k};
            const auto bounds = check_cross_term_bounds(hist, cert, setup.cfg);
            out.reports.push_back(bounds[0]);
            out.reports.push_back(bounds[1]);
            out.reports.push_back(check_descent(hist, cert, setup.cfg));
            out.reports.push_back(check_contraction(hist, ref, cert, setup.cfg));
            st.partial_sum += pot.varphi;
            out.reports.push_back(check_phi_sum_bound(st.partial_sum, st.initial_potential, tr.k));
        } else {
            const Vector d1 = detail::stack(next.x - ref.x, next.lambda - ref.lambda);
            st.initial_potential = detail::quad_form(cert.H, d1) + pot.phi;
        }
        st.w_prev = st.w_k;
        st.w_k = next;
        st.have_prev = true;
    };

    out.result = solve_with_step(p, setup.cfg, w0, fn, obs, setup.warnings);
    out.spectrum = spectrum_report(cert);
    for (const CheckReport& r : out.reports)
        if (!r.pass) out.all_pass = false;
    return out;
}

}  // namespace ineqalm::certify
