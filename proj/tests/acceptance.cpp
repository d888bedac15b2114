// Acceptance gate: one line per criterion, PASS/FAIL, nonzero exit when any
// criterion fails. Each check recomputes its quantities from scratch through
// the public API.

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gdf/gdf.hpp"
#include "oracles.hpp"

using namespace gdf;

namespace {

struct Criterion {
    int id;
    std::string name;
    std::function<bool(std::string&)> run;
};

const ModelParams kStd{0.5, 0.0, 1.0};

double df_at(const Penalty& family, const ModelParams& mp, double delta) {
    const Penalty p = eta_for_delta(family, mp, delta);
    return gdf::gdf(solve_rs(p, mp));
}

double err_pre_of(const Penalty& family, const ModelParams& mp, double delta) {
    const Penalty p = eta_for_delta(family, mp, delta);
    const auto sol = solve_rs(p, mp);
    return observables(p, mp, sol).err_pre;
}

// Largest delta (via bisection) for which the family still has a finite S1
// solution reachable by eta_for_delta.
double branch_edge(const Penalty& family, const ModelParams& mp, double lo, double hi) {
    auto reachable = [&](double d) {
        try {
            eta_for_delta(family, mp, d);
            return true;
        } catch (const std::exception&) {
            return false;
        }
    };
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (reachable(mid) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

bool c1_l1_gdf_identity(std::string& detail) {
    std::vector<double> grid;
    for (int i = 1; i <= 99; ++i) grid.push_back(0.01 * i);
    double worst = 0.0;
    for (const auto& row : sweep_delta(L1{1.0}, kStd, grid)) {
        if (!row.ok) {
            detail = "solver failure at delta=" + std::to_string(row.delta);
            return false;
        }
        worst = std::max(worst, std::abs(row.obs.df - row.delta));
    }
    std::ostringstream os;
    os << "max |df - delta| = " << worst << " over delta in [0.01, 0.99]";
    detail = os.str();
    return worst <= 1e-8;
}

bool c2_l0_branch_boundary(std::string& detail) {
    const double edge = branch_edge(L0{1.0}, kStd, 0.2, 0.3);
    std::ostringstream os;
    os << "S1 -> S2 switch at delta = " << edge << " (target 0.248 +- 0.005)";
    detail = os.str();
    return std::abs(edge - 0.248) <= 0.005;
}

bool c3_scad_stability_boundaries(std::string& detail) {
    const Penalty family = Scad{1.0, 8.0, 1.0};
    // solve along the S1 branch with a carried warm state: cold starts this
    // deep in the branch can wander through the degenerate-curvature region
    std::optional<RSState> warm;
    auto solve_at = [&](double d) {
        const Penalty p = eta_for_delta(family, kStd, d, warm);
        const auto sol = solve_rs(p, kStd, warm);
        warm = sol.state;
        return std::pair{p, sol};
    };
    for (double d = 0.50; d < 0.80; d += 0.02) solve_at(d);

    // AT onset: sign change of (AT value - 1) along delta
    auto at_excess = [&](double d) {
        const auto [p, sol] = solve_at(d);
        return gdf::at_condition_value(p, kStd, sol.state) - 1.0;
    };
    double lo = 0.80, hi = 0.90;
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (at_excess(mid) < 0.0 ? lo : hi) = mid;
    }
    const double at_onset = 0.5 * (lo + hi);

    // RS local-stability loss: the S1 existence margin alpha*(1 - df)
    // extrapolated linearly to zero from just inside the branch
    const double d1 = 0.912, d2 = 0.918;
    auto margin = [&](double d) {
        for (double w = at_onset; w < d; w += 0.005) solve_at(w);
        const auto [p, sol] = solve_at(d);
        return gdf::scad_s1_margin(std::get<Scad>(p), kStd, sol.state);
    };
    const double m1 = margin(d1), m2 = margin(d2);
    const double rs_loss = d2 + m2 * (d2 - d1) / (m1 - m2);

    std::ostringstream os;
    os << "AT onset = " << at_onset << " (0.866 +- 0.005), RS loss = " << rs_loss
       << " (0.924 +- 0.01)";
    detail = os.str();
    return std::abs(at_onset - 0.866) <= 0.005 && std::abs(rs_loss - 0.924) <= 0.01;
}

bool c4_prediction_error_map(std::string& detail) {
    const ModelParams mp{0.5, 0.5, 1.0};
    const Penalty l1 = L1{1.0}, en = ElasticNet{1.0, 0.1}, scad = Scad{1.0, 8.0, 1.0};
    std::ostringstream os;
    bool ok = true;

    const auto [d_l1, o1] = minimize_prediction_error(l1, mp, 0.01, 0.45);
    const auto [d_scad, o3] = minimize_prediction_error(scad, mp, 0.01, 0.45);
    double d_en = kNaN;
    try {
        d_en = minimize_prediction_error(en, mp, 0.01, 0.45).first;
    } catch (const std::exception&) {
    }
    os << "minima: l1 " << d_l1 << " (0.085), en " << d_en << " (0.170), scad " << d_scad
       << " (0.072)";
    ok &= std::abs(d_l1 - 0.085) <= 0.005;
    ok &= std::abs(d_en - 0.170) <= 0.005;
    ok &= std::abs(d_scad - 0.072) <= 0.005;

    const auto x_en_scad = crossover_points(en, scad, mp, 0.005, 0.3);
    const auto x_l1_en = crossover_points(l1, en, mp, 0.005, 0.3);
    const double delta1 = x_en_scad.empty() ? kNaN : x_en_scad.front();
    const double delta2 = x_l1_en.empty() ? kNaN : x_l1_en.front();
    os << "; crossovers: delta1 " << delta1 << " (0.028), delta2 " << delta2 << " (0.045)";
    ok &= std::abs(delta1 - 0.028) <= 0.003;
    ok &= std::abs(delta2 - 0.045) <= 0.003;

    // orderings of err_pre, descending, in the three ranges split by 0.028/0.045
    auto order_ok = [&](double d, const std::vector<Penalty>& desc) {
        const double e0 = err_pre_of(desc[0], mp, d), e1 = err_pre_of(desc[1], mp, d),
                     e2 = err_pre_of(desc[2], mp, d);
        return e0 > e1 && e1 > e2;
    };
    const bool ord = order_ok(0.015, {en, scad, l1}) && order_ok(0.037, {scad, en, l1}) &&
                     order_ok(0.10, {scad, l1, en});
    os << "; orderings " << (ord ? "match" : "mismatch");
    ok &= ord;

    detail = os.str();
    return ok;
}

bool c5_bp_vs_rs_scad(std::string& detail) {
    const Penalty family = Scad{1.0, 5.0, 1.0};
    std::ostringstream os;
    os << "|df_cov - df_RS|:";
    bool ok = true;
    for (double d : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}) {
        const Penalty p = eta_for_delta(family, kStd, d);
        const double df_rs = gdf::gdf(solve_rs(p, kStd));
        const auto res = run_bp_ensemble(p, 200, 100, kStd.m_y, kStd.sigma_y2, EnsembleSpec{},
                                         100, 4242, BPOptions{}, 0);
        const double gap = std::abs(res.df_cov - df_rs);
        os << " " << d << ":" << gap;
        ok &= gap <= 0.05;
    }
    detail = os.str();
    return ok;
}

bool c6_delta_eff_correspondence(std::string& detail) {
    std::vector<std::pair<std::string, EnsembleSpec>> specs;
    specs.emplace_back("iid", EnsembleSpec{});
    EnsembleSpec ex1;
    ex1.kind = EnsembleSpec::Kind::Ex1;
    ex1.c = 0.5;
    specs.emplace_back("ex1", ex1);
    EnsembleSpec ex2;
    ex2.kind = EnsembleSpec::Kind::Ex2;
    ex2.T = 50;  // N/8
    specs.emplace_back("ex2", ex2);

    const std::vector<std::pair<std::string, Penalty>> fams{
        {"l1", L1{1.0}}, {"en", ElasticNet{1.0, 0.1}}, {"scad", Scad{1.0, 5.0, 1.0}}};

    std::ostringstream os;
    bool ok = true;
    std::uint64_t seed = 60001;
    for (const auto& [sname, spec] : specs) {
        for (const auto& [fname, family] : fams) {
            for (double d : {0.2, 0.3}) {
                const Penalty p = eta_for_delta(family, kStd, d);
                const auto res = run_bp_ensemble(p, 400, 200, kStd.m_y, kStd.sigma_y2, spec,
                                                 200, seed += 17, BPOptions{}, 0);
                const double gap = std::abs(res.df_cov - res.delta_eff);
                if (gap > 0.05 || !(res.convergence_rate > 0.5)) {
                    ok = false;
                    os << " [" << sname << "/" << fname << "@" << d << " gap=" << gap
                       << " conv=" << res.convergence_rate << "]";
                }
            }
        }
    }
    detail = ok ? "|df_cov - delta_eff_bp| <= 0.05 on all 18 ensemble points"
                : "violations:" + os.str();
    return ok;
}

bool c7_exhaustive_l0_trend(std::string& detail) {
    const Penalty p = eta_for_delta(L0{1.0}, kStd, 0.15);
    const double eta = std::get<L0>(p).eta;
    const double df_rs = gdf::gdf(solve_rs(p, kStd));
    std::ostringstream os;
    os << "eta=" << eta << " df_RS=" << df_rs << ";";
    bool ok = true;
    double prev_gap = kInf;
    // 4000 samples: the N=16 -> 20 trend increment (~0.01) needs Monte Carlo
    // error well below the ~0.02 that a 500-sample ensemble leaves
    for (int N : {12, 16, 20}) {
        const auto ex = exact_gdf_l0(kStd, N, eta, 4000, 9090 + N, 0);
        const double gap = std::abs(ex.df - df_rs);
        os << " N=" << N << " df=" << ex.df << " mean_delta=" << ex.mean_delta
           << " gap=" << gap;
        ok &= ex.df > ex.mean_delta;  // excess over the naive support fraction
        ok &= gap < prev_gap;         // finite-size gap shrinks with N
        prev_gap = gap;
    }
    detail = os.str();
    return ok;
}

bool c8_argmax_oracle(std::string& detail) {
    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> uh(-6.0, 6.0), uq(0.3, 2.5), u(0.2, 3.0);
    double worst = 0.0;
    for (int family = 0; family < 5; ++family) {
        int done = 0;
        while (done < 1000) {
            const std::vector<Penalty> ps{L1{u(rng)}, ElasticNet{u(rng), u(rng)}, L2{u(rng)},
                                          L0{u(rng)}, Scad{u(rng) * 0.3, 2.5 + u(rng), u(rng)}};
            const Penalty p = ps[family];
            const double h = uh(rng), Qhat = uq(rng);
            if (const auto* s = std::get_if<Scad>(&p))
                if (Qhat * (s->a - 1.0) <= s->eta) continue;
            worst = std::max(worst, std::abs(single_body_argmax(p, h, Qhat) -
                                             testing_oracles::grid_argmax(p, h, Qhat)));
            ++done;
        }
    }
    std::ostringstream os;
    os << "max |x* - grid oracle| = " << worst << " over 1000 draws per penalty";
    detail = os.str();
    return worst <= 1e-4;
}

bool c9_pi_and_derivatives(std::string& detail) {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> uq(0.4, 1.6), uc(0.3, 1.6), u(0.2, 2.0);
    double worst_pi = 0.0, worst_fd = 0.0;
    for (int t = 0; t < 30; ++t) {
        const double Qhat = uq(rng), chihat = uc(rng);
        const std::vector<Penalty> ps{L1{u(rng)}, ElasticNet{u(rng), u(rng)}, L2{u(rng)},
                                      L0{u(rng)}, Scad{u(rng) * 0.3, 2.5 + u(rng), u(rng)}};
        for (const Penalty& p : ps) {
            if (const auto* s = std::get_if<Scad>(&p))
                if (Qhat * (s->a - 1.0) <= s->eta + 0.05) continue;
            const double closed = pi_value(p, Qhat, chihat);
            worst_pi = std::max(
                worst_pi, std::abs(closed - testing_oracles::pi_quadrature(p, Qhat, chihat)) /
                              std::max(1.0, std::abs(closed)));
            const double dchi = testing_oracles::central_diff(
                [&](double c) { return pi_value(p, Qhat, c); }, chihat, 1e-6 * chihat);
            const double dq = testing_oracles::central_diff(
                [&](double q) { return pi_value(p, q, chihat); }, Qhat, 1e-6 * Qhat);
            worst_fd = std::max(worst_fd, std::abs(chi_contrib(p, Qhat, chihat) - dchi) /
                                              std::max(1e-12, std::abs(dchi)));
            worst_fd = std::max(worst_fd, std::abs(q_contrib(p, Qhat, chihat) + dq) /
                                              std::max(1e-12, std::abs(dq)));
        }
    }
    std::ostringstream os;
    os << "max pi rel err = " << worst_pi << ", max derivative rel err = " << worst_fd;
    detail = os.str();
    return worst_pi <= 1e-8 && worst_fd <= 1e-5;
}

bool c10_residuals_and_identities(std::string& detail) {
    const std::vector<std::pair<ModelParams, Penalty>> cases{
        {kStd, L1{1.0}},
        {kStd, ElasticNet{0.8, 0.3}},
        {kStd, L0{1.7}},
        {kStd, Scad{0.3, 8.0, 1.0}},
        {{0.5, 0.5, 1.0}, L1{1.3}},
        {{0.8, 0.2, 2.0}, ElasticNet{1.1, 0.05}}};
    double worst_res = 0.0, worst_id = 0.0;
    for (const auto& [mp, p] : cases) {
        const auto sol = solve_rs(p, mp);
        if (sol.branch != Branch::S1) {
            detail = "unexpected divergent branch";
            return false;
        }
        const auto& st = sol.state;
        const double V = mp.y_second_moment();
        worst_res = std::max(
            {worst_res, std::abs(st.chihat - (st.Q + V) / ((1 + st.chi) * (1 + st.chi))),
             std::abs(st.Qhat - 1.0 / (1.0 + st.chi)),
             std::abs(mp.alpha * st.chi - chi_contrib(p, st.Qhat, st.chihat)),
             std::abs(mp.alpha * st.Q - q_contrib(p, st.Qhat, st.chihat))});
        const auto obs = observables(p, mp, sol);
        worst_id = std::max({worst_id, std::abs(obs.err_train - st.chihat),
                             std::abs(obs.err_pre - obs.err_train - 2.0 * mp.sigma_y2 * obs.df)});
    }
    std::ostringstream os;
    os << "max residual = " << worst_res << ", max identity gap = " << worst_id;
    detail = os.str();
    return worst_res <= 1e-10 && worst_id <= 1e-12;
}

bool c11_penalty_limits(std::string& detail) {
    std::ostringstream os;
    bool ok = true;

    const auto l1 = solve_rs(L1{1.2}, kStd);
    const auto en0 = solve_rs(ElasticNet{1.2, 0.0}, kStd);
    const double en_gap = std::max(std::abs(l1.state.chi - en0.state.chi),
                                   std::abs(l1.state.Q - en0.state.Q));
    os << "EN(eta2=0) vs l1 gap = " << en_gap;
    ok &= en_gap <= 1e-12;

    const auto scad_big = solve_rs(Scad{1.2, 1e6, 1.0}, kStd);
    const double scad_gap = std::max(std::abs(l1.state.chi - scad_big.state.chi),
                                     std::abs(l1.state.Q - scad_big.state.Q));
    os << ", SCAD(a=1e6) vs l1 gap = " << scad_gap;
    ok &= scad_gap <= 1e-4;

    // ridge limit: Qhat/(Qhat+eta2) is the per-predictor trace
    // (1/N) Tr A (A^T A + eta2 I)^-1 A^T, i.e. alpha * df in the per-sample
    // normalization used everywhere else (same alpha bookkeeping as
    // delta_eff_bp)
    const auto ridge = solve_rs(ElasticNet{1e-9, 0.4}, kStd);
    const double df = gdf::gdf(ridge);
    const double want = ridge.state.Qhat / (ridge.state.Qhat + 0.4);
    os << ", EN(eta1->0) alpha*df - Qhat/(Qhat+eta2) = " << std::abs(kStd.alpha * df - want);
    ok &= std::abs(kStd.alpha * df - want) <= 1e-6;

    detail = os.str();
    return ok;
}

bool c12_bp_optimality(std::string& detail) {
    Instance inst{gen_gaussian_iid(100, 200, 2025), gen_y(100, 0.0, 1.0, 2026)};
    std::ostringstream os;
    bool ok = true;
    for (const Penalty& p : {Penalty{L1{0.8}}, Penalty{ElasticNet{0.8, 0.3}}}) {
        const auto st = bp_run(inst, p);
        if (!st.converged) {
            detail = penalty_name(p) + " BP did not converge";
            return false;
        }
        const Eigen::VectorXd g = inst.A.transpose() * (inst.y - inst.A * st.x_hat);
        const double eta1 = std::holds_alternative<L1>(p) ? std::get<L1>(p).eta
                                                          : std::get<ElasticNet>(p).eta1;
        const double eta2 =
            std::holds_alternative<L1>(p) ? 0.0 : std::get<ElasticNet>(p).eta2;
        double viol = 0.0;
        for (Eigen::Index i = 0; i < st.x_hat.size(); ++i) {
            if (st.x_hat(i) != 0.0)
                viol = std::max(viol, std::abs(g(i) - eta2 * st.x_hat(i) -
                                               eta1 * (st.x_hat(i) > 0 ? 1.0 : -1.0)));
            else
                viol = std::max(viol, std::max(0.0, std::abs(g(i)) - eta1));
        }
        const double cd_gap = (st.x_hat - coord_descent(inst, p)).cwiseAbs().maxCoeff();
        os << penalty_name(p) << ": subgradient " << viol << ", |bp - cd| " << cd_gap << "; ";
        ok &= viol <= 1e-6 && cd_gap <= 1e-6;
    }
    detail = os.str();
    return ok;
}

bool c13_gdf_covariance_sanity(std::string& detail) {
    const int S = 500, M = 40;
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> ident, constant;
    for (int s = 0; s < S; ++s) {
        const auto y = gen_y(M, 0.0, 1.0, 31000 + s);
        ident.emplace_back(y, y);
        constant.emplace_back(y, Eigen::VectorXd::Constant(M, 0.7));
    }
    const double bound = 3.0 / std::sqrt(double(S));
    const double gi = gdf_covariance(ident, 0.0, 1.0);
    const double gc = gdf_covariance(constant, 0.0, 1.0);
    std::ostringstream os;
    os << "identity -> " << gi << ", constant -> " << gc << " (bound " << bound << ")";
    detail = os.str();
    return std::abs(gi - 1.0) <= bound && std::abs(gc) <= bound;
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "l1 GDF identity df = delta", c1_l1_gdf_identity},
        {2, "l0 S1 -> S2 branch boundary", c2_l0_branch_boundary},
        {3, "SCAD stability boundaries (a=8)", c3_scad_stability_boundaries},
        {4, "prediction-error minima, crossovers and orderings", c4_prediction_error_map},
        {5, "BP GDF tracks RS GDF (SCAD a=5)", c5_bp_vs_rs_scad},
        {6, "delta_eff_bp matches covariance GDF across ensembles", c6_delta_eff_correspondence},
        {7, "exhaustive l0 GDF excess and finite-size trend", c7_exhaustive_l0_trend},
        {8, "single-body argmax vs grid oracle", c8_argmax_oracle},
        {9, "pi closed forms and saddle derivatives", c9_pi_and_derivatives},
        {10, "saddle residuals and error identities", c10_residuals_and_identities},
        {11, "penalty limit degenerations", c11_penalty_limits},
        {12, "BP fixed points solve the convex problems", c12_bp_optimality},
        {13, "covariance GDF calibration", c13_gdf_covariance_sanity},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        if (!ok) ++failures;
        std::printf("criterion %2d [%s] %s — %s\n", c.id, ok ? "PASS" : "FAIL",
                    c.name.c_str(), detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
