#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ineqalm/rng.hpp"
#include "ineqalm/solvers.hpp"

namespace ineqalm::potts {

/// Regular site grid, 2D when nz == 1. Site index is x-fastest:
/// s = i + nx * (j + ny * k).
struct GridShape {
    Index nx = 1, ny = 1, nz = 1;
    int dims() const { return nz > 1 ? 3 : 2; }
    Index sites() const { return nx * ny * nz; }
};

// ---------------------------------------------------------------------------
// Finite differences: forward-difference gradient with zero-flux boundary,
// divergence as its negative adjoint. Vector fields store the dims()
// components of each site contiguously.
// ---------------------------------------------------------------------------

/// (grad f)[s*d + axis] = f[s + stride] - f[s], zero at the far boundary.
inline Vector grad(const GridShape& g, const Vector& f) {
    const int d = g.dims();
    Vector out = Vector::Zero(g.sites() * d);
    Index s = 0;
    for (Index k = 0; k < g.nz; ++k)
        for (Index j = 0; j < g.ny; ++j)
            for (Index i = 0; i < g.nx; ++i, ++s) {
                if (i + 1 < g.nx) out[s * d + 0] = f[s + 1] - f[s];
                if (j + 1 < g.ny) out[s * d + 1] = f[s + g.nx] - f[s];
                if (d == 3 && k + 1 < g.nz) out[s * d + 2] = f[s + g.nx * g.ny] - f[s];
            }
    return out;
}

/// div = -grad^T: (div q)[s] sums q[s*d+axis] (dropped at the far boundary)
/// minus q[(s-stride)*d+axis] (dropped at the near boundary).
inline Vector div(const GridShape& g, const Vector& q) {
    const int d = g.dims();
    Vector out = Vector::Zero(g.sites());
    Index s = 0;
    for (Index k = 0; k < g.nz; ++k)
        for (Index j = 0; j < g.ny; ++j)
            for (Index i = 0; i < g.nx; ++i, ++s) {
                double v = 0.0;
                if (i + 1 < g.nx) v += q[s * d + 0];
                if (i > 0) v -= q[(s - 1) * d + 0];
                if (j + 1 < g.ny) v += q[s * d + 1];
                if (j > 0) v -= q[(s - g.nx) * d + 1];
                if (d == 3) {
                    if (k + 1 < g.nz) v += q[s * d + 2];
                    if (k > 0) v -= q[(s - g.nx * g.ny) * d + 2];
                }
                out[s] = v;
            }
    return out;
}

// ---------------------------------------------------------------------------
// Model data
// ---------------------------------------------------------------------------

/// Multiphase segmentation instance: image intensities in [0, 1], m labels
/// with values c_i, TV weight alpha, and fidelity fields rho(l_i, .).
struct PottsInstance {
    GridShape grid;
    Vector image;
    int m = 2;
    double alpha = 0.5;
    Vector label_values;               // c_i, length m
    std::vector<Vector> fidelity;      // m fields of grid.sites() entries
};

/// Builds an instance with fidelity rho(l_i, x) = |I(x) - c_i|; label values
/// default to an even spacing of [0, 1].
inline PottsInstance make_potts_instance(const GridShape& grid, Vector image, int m, double alpha,
                                         Vector label_values = Vector()) {
    if (grid.nx < 1 || grid.ny < 1 || grid.nz < 1)
        throw std::invalid_argument("PottsInstance: grid dimensions must be positive");
    if (m < 2) throw std::invalid_argument("PottsInstance: need at least two labels");
    if (!(alpha > 0.0)) throw std::invalid_argument("PottsInstance: alpha must be positive");
    if (image.size() != grid.sites())
        throw std::invalid_argument("PottsInstance: image size does not match grid");
    PottsInstance inst;
    inst.grid = grid;
    inst.image = std::move(image);
    inst.m = m;
    inst.alpha = alpha;
    if (label_values.size() == 0) {
        inst.label_values.resize(m);
        for (int i = 0; i < m; ++i) inst.label_values[i] = static_cast<double>(i) / (m - 1);
    } else if (label_values.size() == m) {
        inst.label_values = std::move(label_values);
    } else {
        throw std::invalid_argument("PottsInstance: label_values length must equal m");
    }
    inst.fidelity.reserve(m);
    for (int i = 0; i < m; ++i)
        inst.fidelity.push_back((inst.image.array() - inst.label_values[i]).abs());
    for (const Vector& rho : inst.fidelity)
        if (!rho.allFinite() || rho.minCoeff() < 0.0)
            throw std::invalid_argument("PottsInstance: fidelity must be nonnegative and finite");
    return inst;
}

/// Flow/multiplier state: source flow p_s, spatial flows q_i constrained to
/// the alpha-ball, and labeling multipliers u_i.
struct PottsState {
    Vector p_s;
    std::vector<Vector> q;
    std::vector<Vector> u;
};

inline PottsState zero_state(const PottsInstance& inst) {
    PottsState st;
    st.p_s = Vector::Zero(inst.grid.sites());
    st.q.assign(inst.m, Vector::Zero(inst.grid.sites() * inst.grid.dims()));
    st.u.assign(inst.m, Vector::Zero(inst.grid.sites()));
    return st;
}

// ---------------------------------------------------------------------------
// Stacking between the state form and the generic primal-dual form
// ---------------------------------------------------------------------------

inline Vector stack_primal(const PottsInstance& inst, const PottsState& st) {
    const Index n_sites = inst.grid.sites();
    const Index qlen = n_sites * inst.grid.dims();
    Vector x(n_sites + inst.m * qlen);
    x.head(n_sites) = st.p_s;
    for (int i = 0; i < inst.m; ++i) x.segment(n_sites + i * qlen, qlen) = st.q[i];
    return x;
}

inline Vector stack_fields(const std::vector<Vector>& fields) {
    Index total = 0;
    for (const Vector& f : fields) total += f.size();
    Vector out(total);
    Index at = 0;
    for (const Vector& f : fields) {
        out.segment(at, f.size()) = f;
        at += f.size();
    }
    return out;
}

inline PottsState state_from(const PottsInstance& inst, const Vector& x, const Vector& lambda) {
    const Index n_sites = inst.grid.sites();
    const Index qlen = n_sites * inst.grid.dims();
    PottsState st;
    st.p_s = x.head(n_sites);
    st.q.reserve(inst.m);
    st.u.reserve(inst.m);
    for (int i = 0; i < inst.m; ++i) {
        st.q.push_back(x.segment(n_sites + i * qlen, qlen));
        st.u.push_back(lambda.segment(i * n_sites, n_sites));
    }
    return st;
}

/// Stacked form of the abbreviated max-flow program: primal (p_s; q_1..q_m),
/// objective -1^T p_s + indicator of the alpha-ball set C, and one constraint
/// block div q_i - p_s >= -rho(l_i, .) per label. A is matrix-free.
inline ProblemSpec build_potts_problem(const PottsInstance& inst) {
    const Index n_sites = inst.grid.sites();
    const int d = inst.grid.dims();
    const Index qlen = n_sites * d;
    const int m = inst.m;
    const GridShape grid = inst.grid;
    const double alpha = inst.alpha;

    ProblemSpec p;
    p.n = n_sites + m * qlen;
    p.m = static_cast<Index>(m) * n_sites;
    p.name = "potts_" + std::to_string(inst.grid.nx) + "x" + std::to_string(inst.grid.ny) +
             (grid.dims() == 3 ? "x" + std::to_string(inst.grid.nz) : "") + "_m" + std::to_string(m);

    p.A.rows = p.m;
    p.A.cols = p.n;
    p.A.forward = [grid, m, n_sites, qlen](const Vector& x) {
        Vector out(static_cast<Index>(m) * n_sites);
        const auto p_s = x.head(n_sites);
        for (int i = 0; i < m; ++i)
            out.segment(i * n_sites, n_sites) = div(grid, x.segment(n_sites + i * qlen, qlen)) - p_s;
        return out;
    };
    p.A.adjoint = [grid, m, n_sites, qlen](const Vector& w) {
        Vector out(n_sites + static_cast<Index>(m) * qlen);
        out.head(n_sites).setZero();
        for (int i = 0; i < m; ++i) {
            const Vector wi = w.segment(i * n_sites, n_sites);
            out.head(n_sites) -= wi;
            out.segment(n_sites + i * qlen, qlen) = -grad(grid, wi);  // Div^T = -grad
        }
        return out;
    };

    p.b.resize(p.m);
    for (int i = 0; i < m; ++i) p.b.segment(i * n_sites, n_sites) = -inst.fidelity[i];

    p.X = whole_space();
    p.theta.evaluate = [n_sites, m, qlen, alpha, d](const Vector& x) {
        for (int i = 0; i < m; ++i) {
            const Vector qi = x.segment(n_sites + i * qlen, qlen);
            for (Index s = 0; s < qlen / d; ++s)
                if (qi.segment(s * d, d).norm() > alpha + 1e-9)
                    return std::numeric_limits<double>::infinity();
        }
        return -x.head(n_sites).sum();
    };
    p.theta.prox = [n_sites, m, qlen, alpha, d](const Vector& y, double c) {
        Vector out(y.size());
        out.head(n_sites) = y.head(n_sites).array() + c;  // prox of -1^T p_s
        for (int i = 0; i < m; ++i)
            out.segment(n_sites + i * qlen, qlen) =
                project_l2_ball_sitewise(y.segment(n_sites + i * qlen, qlen), alpha, d);
        return out;
    };
    return p;
}

// ---------------------------------------------------------------------------
// Spectral bounds and default parameters
// ---------------------------------------------------------------------------

/// rho(A^T A) <= 8 + m on 2D grids and 12 + m on 3D grids.
inline double rho_bound_potts(int dims, int m) {
    if (m < 1) throw std::invalid_argument("rho_bound_potts: m must be >= 1");
    if (dims == 2) return 8.0 + m;
    if (dims == 3) return 12.0 + m;
    throw std::invalid_argument("rho_bound_potts: dims must be 2 or 3");
}

/// Default proximal scalar for segmentation runs, matching the experiment
/// table settings: 9.1 beta / 13.1 beta for two labels in 2D / 3D and
/// 12.1 beta / 16.1 beta for four labels; other label counts fall back to
/// beta * (bound + 0.1).
inline double potts_default_r(int dims, int m, double beta) {
    if (m == 2) return beta * (dims == 2 ? 9.1 : 13.1);
    if (m == 4) return beta * (dims == 2 ? 12.1 : 16.1);
    return beta * (rho_bound_potts(dims, m) + 0.1);
}

// ---------------------------------------------------------------------------
// Specialized iteration
// ---------------------------------------------------------------------------

struct PottsStepOut {
    PottsState next;
    std::vector<Vector> u_tilde;
};

/// The four sub-updates of the linearized scheme specialized to the stacked
/// max-flow structure:
///   u_tilde_i = [u_i - beta(-p_s + rho_i + div q_i)]_+
///   p_s+      = p_s + (1 - sum_i u_tilde_i) / (tau r)
///   q_i+      = P_C(q_i - grad(u_tilde_i) / (tau r))
///   u_i+      = u_tilde_i + beta { p_s+ - p_s + div(q_i - q_i+) }.
/// Label updates are mutually independent given the shared p_s.
inline PottsStepOut potts_step(const PottsInstance& inst, const PottsState& st,
                               const SolverConfig& cfg) {
    if (!cfg.r) throw std::invalid_argument("potts_step: config.r must be resolved");
    const double tau_r = cfg.tau * *cfg.r;
    const Index n_sites = inst.grid.sites();
    PottsStepOut out;
    out.u_tilde.resize(inst.m);
    out.next.q.resize(inst.m);
    out.next.u.resize(inst.m);

    std::vector<Vector> div_q(inst.m);
    Vector sum_ut = Vector::Zero(n_sites);
    for (int i = 0; i < inst.m; ++i) {
        div_q[i] = div(inst.grid, st.q[i]);
        out.u_tilde[i] =
            project_nonneg(st.u[i] - cfg.beta * (inst.fidelity[i] + div_q[i] - st.p_s));
        sum_ut += out.u_tilde[i];
    }
    out.next.p_s = st.p_s.array() + (1.0 - sum_ut.array()) / tau_r;
    const Vector dp = out.next.p_s - st.p_s;
    for (int i = 0; i < inst.m; ++i) {
        out.next.q[i] = project_l2_ball_sitewise(
            st.q[i] - grad(inst.grid, out.u_tilde[i]) / tau_r, inst.alpha, inst.grid.dims());
        out.next.u[i] = out.u_tilde[i] + cfg.beta * (dp + div_q[i] - div(inst.grid, out.next.q[i]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Segmentation driver
// ---------------------------------------------------------------------------

struct SegmentationResult {
    std::vector<int> label_map;  // 1-based labels
    std::vector<Vector> u;
    long iterations = 0;
    double final_aer = std::numeric_limits<double>::quiet_NaN();
};

/// Per-site argmax of the labeling functions; ties break toward the smallest
/// label index.
inline SegmentationResult extract_labels(const PottsState& st) {
    for (const Vector& ui : st.u)
        if (!ui.allFinite()) throw std::invalid_argument("extract_labels: non-finite field");
    SegmentationResult res;
    res.u = st.u;
    const Index n_sites = st.p_s.size();
    res.label_map.resize(n_sites);
    for (Index s = 0; s < n_sites; ++s) {
        int best = 0;
        for (std::size_t i = 1; i < st.u.size(); ++i)
            if (st.u[i][s] > st.u[best][s]) best = static_cast<int>(i);
        res.label_map[s] = best + 1;
    }
    return res;
}

struct PottsRunResult {
    PottsState state;
    SegmentationResult segmentation;
    SolveResult solve;  // traces on the stacked representation
    double r_used = 0.0;
};

/// Runs the specialized iteration from the zero state until the normalized
/// predictor gap ||u_tilde - u|| / size(u) falls below tol. r defaults to the
/// table setting for the grid dimensionality and label count.
inline PottsRunResult run_potts(const PottsInstance& inst, SolverConfig cfg,
                                const Observer& observer = {}) {
    auto warnings = validate(cfg);
    if (!cfg.r) cfg.r = potts_default_r(inst.grid.dims(), inst.m, cfg.beta);
    cfg.stopping_rule = StoppingRule::NormalizedStep;

    const ProblemSpec stacked = build_potts_problem(inst);
    StepFn fn = [&inst](const ProblemSpec&, const SolverConfig& c, const PrimalDualPoint& w) {
        const PottsState st = state_from(inst, w.x, w.lambda);
        PottsStepOut stepped = potts_step(inst, st, c);
        StepResult s;
        s.next.x = stack_primal(inst, stepped.next);
        s.next.lambda = stack_fields(stepped.next.u);
        s.predictor.x_tilde = s.next.x;
        s.predictor.lambda_tilde = stack_fields(stepped.u_tilde);
        return s;
    };

    PottsRunResult out;
    out.r_used = *cfg.r;
    out.solve = solve_with_step(stacked, cfg, default_start(stacked), fn, observer,
                                std::move(warnings));
    out.state = state_from(inst, out.solve.final.x, out.solve.final.lambda);
    out.segmentation = extract_labels(out.state);
    out.segmentation.iterations = out.solve.iterations;
    if (!out.solve.traces.empty()) out.segmentation.final_aer = out.solve.traces.back().aer;
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic instances with stored ground truth
// ---------------------------------------------------------------------------

struct SyntheticImage {
    GridShape grid;
    Vector image;
    std::vector<int> ground_truth;  // 1-based labels
};

/// Centered ball (disk in 2D) of high intensity on a dark background, with
/// optional Gaussian noise clipped back to [0, 1].
inline SyntheticImage synthetic_two_region(Index nx, Index ny, Index nz = 1,
                                           double noise_sigma = 0.0, std::uint64_t seed = 1) {
    GridShape g{nx, ny, nz};
    SyntheticImage img;
    img.grid = g;
    img.image.resize(g.sites());
    img.ground_truth.resize(g.sites());
    const double cx = (nx - 1) / 2.0, cy = (ny - 1) / 2.0, cz = (nz - 1) / 2.0;
    double radius = std::min(nx, ny) / 4.0;
    if (g.dims() == 3) radius = std::min(radius, nz / 4.0 + 1.0);
    CounterRng rng(seed, /*stream=*/0x707);
    Index s = 0;
    for (Index k = 0; k < nz; ++k)
        for (Index j = 0; j < ny; ++j)
            for (Index i = 0; i < nx; ++i, ++s) {
                const double dx = i - cx, dy = j - cy, dz = g.dims() == 3 ? k - cz : 0.0;
                const bool inside = dx * dx + dy * dy + dz * dz <= radius * radius;
                img.ground_truth[s] = inside ? 2 : 1;
                double v = inside ? 0.9 : 0.1;
                if (noise_sigma > 0.0) v += noise_sigma * rng.next_gaussian();
                img.image[s] = std::min(1.0, std::max(0.0, v));
            }
    return img;
}

/// m vertical bands of evenly spaced intensity, one label per band.
inline SyntheticImage synthetic_stripes(Index nx, Index ny, int m, Index nz = 1,
                                        double noise_sigma = 0.0, std::uint64_t seed = 1) {
    if (m < 2) throw std::invalid_argument("synthetic_stripes: need at least two labels");
    GridShape g{nx, ny, nz};
    SyntheticImage img;
    img.grid = g;
    img.image.resize(g.sites());
    img.ground_truth.resize(g.sites());
    CounterRng rng(seed, /*stream=*/0x717);
    Index s = 0;
    for (Index k = 0; k < nz; ++k)
        for (Index j = 0; j < ny; ++j)
            for (Index i = 0; i < nx; ++i, ++s) {
                const int band = std::min<int>(m - 1, static_cast<int>(i * m / nx));
                img.ground_truth[s] = band + 1;
                double v = static_cast<double>(band) / (m - 1);
                if (noise_sigma > 0.0) v += noise_sigma * rng.next_gaussian();
                img.image[s] = std::min(1.0, std::max(0.0, v));
            }
    return img;
}

inline double segmentation_accuracy(const std::vector<int>& labels,
                                    const std::vector<int>& ground_truth) {
    if (labels.size() != ground_truth.size() || labels.empty())
        throw std::invalid_argument("segmentation_accuracy: size mismatch");
    long hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == ground_truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace ineqalm::potts
