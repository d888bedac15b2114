#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gdf/model_selection.hpp"

using namespace gdf;

TEST_CASE("observable identities on S1 solutions") {
    const ModelParams mp{0.5, 0.5, 1.0};
    for (const Penalty& p :
         {Penalty{L1{1.0}}, Penalty{ElasticNet{0.8, 0.2}}, Penalty{Scad{0.3, 8.0, 1.0}},
          Penalty{L0{1.7}}}) {
        const auto sol = solve_rs(p, mp);
        REQUIRE(sol.branch == Branch::S1);
        const auto obs = observables(p, mp, sol);
        CHECK(obs.df == doctest::Approx(sol.state.chi / (1.0 + sol.state.chi)));
        CHECK(obs.err_train == doctest::Approx(sol.state.chihat));
        CHECK(obs.err_pre - obs.err_train == doctest::Approx(2.0 * mp.sigma_y2 * obs.df));
        CHECK(obs.aic == doctest::Approx(obs.err_train / mp.sigma_y2 + 2.0 * obs.df));
        // free energy identity: f - r_bar = alpha * err_train / 2
        CHECK(obs.free_energy - obs.r_bar ==
              doctest::Approx(mp.alpha * obs.err_train / 2.0).epsilon(1e-8));
    }
}

TEST_CASE("gdf saturates at 1 on divergent branches") {
    const ModelParams mp{0.5, 0.0, 1.0};
    const auto sol = solve_rs(L0{0.05}, mp);
    REQUIRE(sol.divergent());
    CHECK(gdf::gdf(sol) == 1.0);
    const auto obs = observables(L0{0.05}, mp, sol);
    CHECK(obs.df == 1.0);
    CHECK(obs.err_train == 0.0);
    CHECK(obs.err_pre == doctest::Approx(2.0 * mp.sigma_y2));
}

TEST_CASE("l1 sweep has df equal to delta") {
    const ModelParams mp{0.5, 0.0, 1.0};
    std::vector<double> grid;
    for (double d = 0.05; d < 0.96; d += 0.1) grid.push_back(d);
    const auto rows = sweep_delta(L1{1.0}, mp, grid);
    REQUIRE(rows.size() == grid.size());
    for (const auto& r : rows) {
        REQUIRE(r.ok);
        CHECK(r.obs.df == doctest::Approx(r.delta).epsilon(1e-8));
    }
}

TEST_CASE("sweep flags unreachable points instead of aborting") {
    const ModelParams mp{0.5, 0.0, 1.0};
    const auto rows = sweep_delta(L0{1.0}, mp, {0.1, 0.2, 0.4});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].ok);
    CHECK(rows[1].ok);
    // delta=0.4 is beyond the l0 S1 branch: reported as the divergent branch
    CHECK(rows[2].obs.df == 1.0);
    CHECK_FALSE(rows[2].error.empty());
}

TEST_CASE("prediction error minimum for l1 at m_y=0.5") {
    const ModelParams mp{0.5, 0.5, 1.0};
    const auto [dstar, obs] = minimize_prediction_error(L1{1.0}, mp, 0.01, 0.5);
    CHECK(dstar == doctest::Approx(0.0853).epsilon(0.02));
    CHECK(obs.err_pre < 1.3);
}

TEST_CASE("no interior minimum is reported as such") {
    // with m_y=0 the l1 prediction error is increasing in delta
    const ModelParams mp{0.5, 0.0, 1.0};
    CHECK_THROWS_AS(minimize_prediction_error(L1{1.0}, mp, 0.2, 0.8),
                    NoMinimumInRangeError);
}

TEST_CASE("crossover between l1 and elastic net prediction errors") {
    const ModelParams mp{0.5, 0.5, 1.0};
    const auto xs = crossover_points(L1{1.0}, ElasticNet{1.0, 0.1}, mp, 0.01, 0.3);
    REQUIRE(!xs.empty());
    const double x = xs.front();
    // sign change of the difference across the crossover
    const auto at = [&](const Penalty& fam, double d) {
        const Penalty p = eta_for_delta(fam, mp, d);
        return observables(p, mp, solve_rs(p, mp)).err_pre;
    };
    const double below = at(L1{1.0}, x - 0.005) - at(ElasticNet{1.0, 0.1}, x - 0.005);
    const double above = at(L1{1.0}, x + 0.005) - at(ElasticNet{1.0, 0.1}, x + 0.005);
    CHECK(below * above < 0.0);
}
