#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gdf/rs_solver.hpp"
#include "oracles.hpp"

using namespace gdf;

namespace {

// Residuals of the four saddle equations at a solution.
double saddle_residual(const Penalty& p, const ModelParams& mp, const RSState& st) {
    const double V = mp.y_second_moment();
    const double r1 = st.chihat - (st.Q + V) / ((1.0 + st.chi) * (1.0 + st.chi));
    const double r2 = st.Qhat - 1.0 / (1.0 + st.chi);
    const double r3 = mp.alpha * st.chi - chi_contrib(p, st.Qhat, st.chihat);
    const double r4 = mp.alpha * st.Q - q_contrib(p, st.Qhat, st.chihat);
    return std::max({std::abs(r1), std::abs(r2), std::abs(r3), std::abs(r4)});
}

}  // namespace

TEST_CASE("Gauss-Legendre rule integrates polynomials and the Gaussian") {
    // order-n rule is exact for degree 2n-1
    const double cubic = detail::gl_integrate([](double x) { return x * x * x + 2.0 * x; },
                                              -1.0, 3.0, 8);
    CHECK(cubic == doctest::Approx(20.0 + 8.0).epsilon(1e-13));
    double g = 0.0;
    for (double a = -8.0; a < 8.0; a += 2.0)
        g += detail::gl_integrate([](double z) { return std::exp(-z * z); }, a, a + 2.0, 32);
    CHECK(g == doctest::Approx(kSqrtPi).epsilon(1e-13));
}

TEST_CASE("S1 solutions satisfy the saddle equations to 1e-10") {
    const ModelParams mp{0.5, 0.0, 1.0};
    const std::vector<Penalty> ps{L1{1.0},
                                  ElasticNet{1.0, 0.1},
                                  L2{0.5},
                                  L0{1.6},
                                  Scad{0.4, 8.0, 1.0},
                                  Scad{0.25, 5.0, 1.0}};
    for (const auto& p : ps) {
        const auto sol = solve_rs(p, mp);
        REQUIRE(sol.converged);
        REQUIRE(sol.branch == Branch::S1);
        CHECK(saddle_residual(p, mp, sol.state) <= 1e-10);
        CHECK(sol.rho_hat == doctest::Approx(rho_hat(p, sol.state.Qhat, sol.state.chihat)));
    }
}

TEST_CASE("nonzero data mean enters through the second moment") {
    const ModelParams mp{0.5, 0.5, 1.0};
    const auto sol = solve_rs(L1{1.0}, mp);
    REQUIRE(sol.converged);
    CHECK(saddle_residual(L1{1.0}, mp, sol.state) <= 1e-10);
    const double V = 1.0 + 0.25;
    CHECK(sol.state.chihat ==
          doctest::Approx((sol.state.Q + V) / ((1.0 + sol.state.chi) * (1.0 + sol.state.chi))));
}

TEST_CASE("l1 closed-form solution: chi = rho/(alpha - rho), Q from tau") {
    const ModelParams mp{0.5, 0.0, 1.0};
    const auto sol = solve_rs(L1{1.2}, mp);
    const double rho = sol.rho_hat;
    CHECK(sol.state.chi == doctest::Approx(rho / (mp.alpha - rho)).epsilon(1e-9));
    const double th = 1.2 / std::sqrt(2.0 * sol.state.chihat);
    const double tau = detail::soft_tau(th);
    CHECK(sol.state.Q ==
          doctest::Approx(mp.y_second_moment() * tau / (mp.alpha - tau)).epsilon(1e-9));
}

TEST_CASE("AT closed forms match the generic quadrature route") {
    const ModelParams mp{0.5, 0.0, 1.0};
    const std::vector<Penalty> ps{L1{1.0}, ElasticNet{0.8, 0.3}, L2{0.5}, Scad{0.3, 8.0, 1.0}};
    for (const auto& p : ps) {
        const auto sol = solve_rs(p, mp);
        REQUIRE(sol.converged);
        const double closed = at_condition_value(p, mp, sol.state);
        const double quad = at_integral_value(p, mp, sol.state);
        CHECK(closed == doctest::Approx(quad).epsilon(1e-8));
    }
}

TEST_CASE("l0 AT condition is always violated") {
    const ModelParams mp{0.5, 0.0, 1.0};
    const auto sol = solve_rs(L0{1.6}, mp);
    REQUIRE(sol.branch == Branch::S1);
    CHECK_FALSE(sol.at_stable);
    CHECK(at_condition_value(L0{1.6}, mp, sol.state) == kInf);
}

TEST_CASE("eta_for_delta hits the target support fraction") {
    const ModelParams mp{0.5, 0.0, 1.0};
    for (const Penalty& family :
         {Penalty{L1{1.0}}, Penalty{ElasticNet{1.0, 0.1}}, Penalty{L0{1.0}},
          Penalty{Scad{1.0, 8.0, 1.0}}}) {
        for (double d : {0.05, 0.15, 0.22}) {
            const Penalty p = eta_for_delta(family, mp, d);
            const auto sol = solve_rs(p, mp);
            REQUIRE(sol.converged);
            CHECK(sol.rho_hat / mp.alpha == doctest::Approx(d).epsilon(1e-7));
        }
    }
}

TEST_CASE("eta_for_delta rejects targets beyond the S1 branch") {
    const ModelParams mp{0.5, 0.0, 1.0};
    CHECK_THROWS_AS(eta_for_delta(L0{1.0}, mp, 0.4), NotBracketedError);
    CHECK_THROWS_AS(eta_for_delta(L1{1.0}, mp, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(eta_for_delta(L1{1.0}, mp, 1.5), std::invalid_argument);
}

TEST_CASE("l0 beyond the branch boundary diverges to S2") {
    const ModelParams mp{0.5, 0.0, 1.0};
    // weak l0 penalty: alpha < rho + omega, no finite S1 solution
    const auto sol = solve_rs(L0{0.05}, mp);
    CHECK(sol.divergent());
    CHECK(std::isinf(sol.state.chi));
}

TEST_CASE("SCAD S1 margin equals alpha*(1 - df)") {
    const ModelParams mp{0.5, 0.0, 1.0};
    const Scad s{0.3, 5.0, 1.0};
    const auto sol = solve_rs(Penalty{s}, mp);
    REQUIRE(sol.branch == Branch::S1);
    const double df = sol.state.chi / (1.0 + sol.state.chi);
    CHECK(scad_s1_margin(s, mp, sol.state) ==
          doctest::Approx(mp.alpha * (1.0 - df)).epsilon(1e-9));
}

TEST_CASE("warm starts reproduce the cold solution") {
    const ModelParams mp{0.5, 0.0, 1.0};
    const Penalty p = Scad{0.35, 8.0, 1.0};
    const auto cold = solve_rs(p, mp);
    auto near = cold.state;
    near.chi *= 1.05;
    near.Q *= 0.95;
    const auto warm = solve_rs(p, mp, near);
    CHECK(warm.state.chi == doctest::Approx(cold.state.chi).epsilon(1e-9));
    CHECK(warm.state.Q == doctest::Approx(cold.state.Q).epsilon(1e-9));
}
