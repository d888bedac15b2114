#pragma once

#include <utility>

#include "gdf/rs_solver.hpp"

// Observables derived from an RS solution (GDF, training and prediction
// error, AIC, free energy, regularization expectation), the delta-sweep
// driver, prediction-error minimization and crossover location.

namespace gdf {

struct NoMinimumInRangeError : std::runtime_error {
    explicit NoMinimumInRangeError(const std::string& what) : std::runtime_error(what) {}
};

// Generalized degrees of freedom, chi/(1+chi), independent of the penalty;
// exactly 1 on the divergent branches.
inline double gdf(const RSSolution& sol) {
    if (sol.divergent()) return 1.0;
    return sol.state.chi / (1.0 + sol.state.chi);
}

inline Observables observables(const Penalty& p, const ModelParams& mp, const RSSolution& sol) {
    Observables o{};
    o.df = gdf(sol);
    if (sol.divergent()) {
        // chihat -> 0 as chi runs away, so the training error vanishes and
        // only df / err_pre / aic remain meaningful.
        o.err_train = 0.0;
        o.err_pre = 2.0 * mp.sigma_y2 * o.df;
        o.aic = 2.0 * o.df;
        o.r_bar = kNaN;
        o.free_energy = kNaN;
        return o;
    }
    const RSState& st = sol.state;
    o.err_train = st.chihat;
    o.err_pre = st.chihat + 2.0 * mp.sigma_y2 * o.df;
    o.aic = o.err_train / mp.sigma_y2 + 2.0 * o.df;
    o.r_bar = r_bar_value(p, mp, st);
    // f = alpha (Q + E[y^2]) / (2(1+chi)) - alpha (Q Qhat - chi chihat)/2 - pi/2
    o.free_energy = mp.alpha * (st.Q + mp.y_second_moment()) / (2.0 * (1.0 + st.chi)) -
                    0.5 * mp.alpha * (st.Q * st.Qhat - st.chi * st.chihat) -
                    0.5 * pi_value(p, st.Qhat, st.chihat);
    return o;
}

struct SweepRow {
    double delta = kNaN;
    Penalty penalty;      // family member with the tuned strength
    RSSolution sol{};
    Observables obs{};
    bool ok = false;      // false when eta_for_delta / solve_rs failed
    std::string error;    // failure description; branch label for S2/S3 rows
};

// Evaluate a penalty family along a delta grid: tune the strength for each
// target delta, solve, and attach observables. Points beyond a branch
// boundary (delta unreachable on S1) are emitted as divergent-branch rows
// with df = 1 rather than aborting the sweep. Warm starts serialize the
// sweep; the grid should be monotone.
inline std::vector<SweepRow> sweep_delta(const Penalty& family, const ModelParams& mp,
                                         const std::vector<double>& deltas) {
    std::vector<SweepRow> rows;
    rows.reserve(deltas.size());
    std::optional<RSState> warm;
    for (double d : deltas) {
        SweepRow row;
        row.delta = d;
        row.penalty = family;
        try {
            row.penalty = eta_for_delta(family, mp, d, warm);
            row.sol = solve_rs(row.penalty, mp, warm);
            row.obs = observables(row.penalty, mp, row.sol);
            row.ok = true;
            if (row.sol.divergent()) {
                row.error = branch_name(row.sol.branch);
            } else {
                warm = row.sol.state;
            }
        } catch (const NotBracketedError& e) {
            // target delta lies beyond the finite branch: report the
            // divergent solution the system actually settles on
            row.sol.branch = Branch::S2;
            row.sol.converged = true;
            row.sol.state = RSState{kInf, kInf, 0.0, 0.0};
            row.sol.rho_hat = kNaN;
            row.obs = observables(family, mp, row.sol);
            row.ok = true;
            row.error = e.what();
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace detail {

// err_pre at a single target delta (NaN if the point is not solvable on S1)
inline double err_pre_at(const Penalty& family, const ModelParams& mp, double delta,
                         std::optional<RSState>& warm) {
    try {
        const Penalty p = eta_for_delta(family, mp, delta, warm);
        const RSSolution sol = solve_rs(p, mp, warm);
        if (!sol.divergent()) warm = sol.state;
        return observables(p, mp, sol).err_pre;
    } catch (const std::exception&) {
        return kNaN;
    }
}

}  // namespace detail

// Locate the minimizer of the prediction-error curve over [delta_lo,
// delta_hi]: coarse uniform grid, then golden-section refinement to
// |delta step| <= 1e-3. Throws NoMinimumInRange when the coarse argmin
// sits on the range boundary (monotone curve).
inline std::pair<double, Observables> minimize_prediction_error(
    const Penalty& family, const ModelParams& mp, double delta_lo, double delta_hi,
    int grid_points = 200, double tol = 1e-3) {
    std::vector<double> grid(grid_points);
    for (int i = 0; i < grid_points; ++i)
        grid[i] = delta_lo + (delta_hi - delta_lo) * i / (grid_points - 1);
    const auto rows = sweep_delta(family, mp, grid);

    int best = -1;
    for (int i = 0; i < grid_points; ++i) {
        if (!rows[i].ok || rows[i].sol.divergent()) continue;
        if (best < 0 || rows[i].obs.err_pre < rows[best].obs.err_pre) best = i;
    }
    if (best <= 0 || best >= grid_points - 1 || !rows[best - 1].ok || !rows[best + 1].ok)
        throw NoMinimumInRangeError("minimize_prediction_error: no interior minimum in range");

    double a = rows[best - 1].delta, b = rows[best + 1].delta;
    std::optional<RSState> warm = rows[best].sol.state;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = detail::err_pre_at(family, mp, x1, warm);
    double f2 = detail::err_pre_at(family, mp, x2, warm);
    while (b - a > tol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = detail::err_pre_at(family, mp, x1, warm);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = detail::err_pre_at(family, mp, x2, warm);
        }
    }
    const double dstar = 0.5 * (a + b);
    const Penalty p = eta_for_delta(family, mp, dstar, warm);
    const RSSolution sol = solve_rs(p, mp, warm);
    return {dstar, observables(p, mp, sol)};
}

// Deltas where the prediction-error curves of two families intersect,
// located by bisection on the difference of the curves; empty when the
// curves do not cross in the range.
inline std::vector<double> crossover_points(const Penalty& famA, const Penalty& famB,
                                            const ModelParams& mp, double delta_lo,
                                            double delta_hi, int grid_points = 200,
                                            double tol = 1e-3) {
    std::optional<RSState> warmA, warmB;
    auto diff = [&](double d) {
        return detail::err_pre_at(famA, mp, d, warmA) - detail::err_pre_at(famB, mp, d, warmB);
    };
    std::vector<double> grid(grid_points), vals(grid_points);
    for (int i = 0; i < grid_points; ++i) {
        grid[i] = delta_lo + (delta_hi - delta_lo) * i / (grid_points - 1);
        vals[i] = diff(grid[i]);
    }
    std::vector<double> out;
    for (int i = 0; i + 1 < grid_points; ++i) {
        if (!std::isfinite(vals[i]) || !std::isfinite(vals[i + 1])) continue;
        if (vals[i] == 0.0) {
            out.push_back(grid[i]);
            continue;
        }
        if (vals[i] * vals[i + 1] >= 0.0) continue;
        double a = grid[i], b = grid[i + 1], fa = vals[i];
        while (b - a > tol) {
            const double m = 0.5 * (a + b);
            const double fm = diff(m);
            if (!std::isfinite(fm)) break;
            if (fa * fm <= 0.0) {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        out.push_back(0.5 * (a + b));
    }
    return out;
}

}  // namespace gdf
