#include <catch2/catch_amalgamated.hpp>

#include "irsrobust/worstcase.hpp"
#include "test_util.hpp"

using namespace irsrobust;
using testutil::make_setup;

namespace {

// exact useful signal power |(h^H + e^H (Ghat + dG)) f|^2
double exact_power(const VecC& h, const MatC& g_hat, const MatC& dg, const VecC& e, const VecC& f) {
    return std::norm(((h.adjoint() + e.adjoint() * (g_hat + dg)) * f).value());
}

double exact_power_full(const VecC& h_hat, const VecC& dh, const MatC& g_hat, const MatC& dg,
                        const VecC& e, const VecC& f) {
    return std::norm((((h_hat + dh).adjoint() + e.adjoint() * (g_hat + dg)) * f).value());
}

// surrogate straight from the first-order Taylor inequality, with the true
// channel G = Ghat + dG substituted in both the point and the expansion
double taylor_surrogate(const VecC& h, const MatC& g, const VecC& e, const VecC& f,
                        const VecC& e_prev, const VecC& f_prev) {
    const cxd x = ((h.adjoint() + e.adjoint() * g) * f).value();
    const cxd xn = ((h.adjoint() + e_prev.adjoint() * g) * f_prev).value();
    return 2.0 * std::real(std::conj(xn) * x) - std::norm(xn);
}

}  // namespace

TEST_CASE("lemma 3 coefficients reproduce the Taylor surrogate exactly") {
    Rng rng(11);
    const int n = 2, m = 3;
    for (int trial = 0; trial < 200; ++trial) {
        VecC f = rng.cnormal_vector(n), fp = rng.cnormal_vector(n);
        VecC e = rng.unit_phases(m), ep = rng.unit_phases(m);
        VecC h = rng.cnormal_vector(n);
        MatC g = rng.cnormal_matrix(m, n);
        MatC dg = 0.3 * rng.cnormal_matrix(m, n);

        auto co = lemma3_coefficients(f, e, fp, ep, h, g);
        CHECK(co.a_mat.rows() == m * n);
        CHECK(co.a_vec.size() == m * n);
        const double direct = taylor_surrogate(h, g + dg, e, f, ep, fp);
        CHECK(co.eval(dg) == Catch::Approx(direct).margin(1e-9 * (1.0 + std::abs(direct))));
    }
}

TEST_CASE("lemma 3 surrogate never exceeds the exact power") {
    Rng rng(12);
    const int n = 3, m = 4;
    for (int trial = 0; trial < 1000; ++trial) {
        VecC f = rng.cnormal_vector(n), fp = rng.cnormal_vector(n);
        VecC e = rng.unit_phases(m), ep = rng.unit_phases(m);
        VecC h = rng.cnormal_vector(n);
        MatC g = rng.cnormal_matrix(m, n);
        MatC dg = 0.5 * rng.cnormal_matrix(m, n);
        auto co = lemma3_coefficients(f, e, fp, ep, h, g);
        const double ex = exact_power(h, g, dg, e, f);
        CHECK(co.eval(dg) <= ex + 1e-9 * (1.0 + ex));
    }
    // equality at the expansion point with zero error
    for (int trial = 0; trial < 50; ++trial) {
        VecC f = rng.cnormal_vector(n);
        VecC e = rng.unit_phases(m);
        VecC h = rng.cnormal_vector(n);
        MatC g = rng.cnormal_matrix(m, n);
        auto co = lemma3_coefficients(f, e, f, e, h, g);
        const double ex = exact_power(h, g, MatC::Zero(m, n), e, f);
        CHECK(co.eval(MatC::Zero(m, n)) == Catch::Approx(ex).margin(1e-8 * (1.0 + ex)));
    }
}

TEST_CASE("lemma 4 coefficients reproduce the Taylor surrogate exactly") {
    Rng rng(13);
    const int n = 2, m = 3;
    for (int trial = 0; trial < 200; ++trial) {
        VecC f = rng.cnormal_vector(n), fp = rng.cnormal_vector(n);
        VecC e = rng.unit_phases(m), ep = rng.unit_phases(m);
        VecC hh = rng.cnormal_vector(n);
        MatC g = rng.cnormal_matrix(m, n);
        MatC dg = 0.3 * rng.cnormal_matrix(m, n);
        VecC dh = 0.3 * rng.cnormal_vector(n);

        auto co = lemma4_coefficients(f, e, fp, ep, hh, g);
        CHECK(co.a_mat.rows() == n + m * n);
        const double direct = taylor_surrogate(hh + dh, g + dg, e, f, ep, fp);
        CHECK(co.eval(dh, dg) == Catch::Approx(direct).margin(1e-9 * (1.0 + std::abs(direct))));

        const double ex = exact_power_full(hh, dh, g, dg, e, f);
        CHECK(co.eval(dh, dg) <= ex + 1e-9 * (1.0 + ex));
    }
    // equality at the expansion point with zero error
    for (int trial = 0; trial < 50; ++trial) {
        VecC f = rng.cnormal_vector(n);
        VecC e = rng.unit_phases(m);
        VecC hh = rng.cnormal_vector(n);
        MatC g = rng.cnormal_matrix(m, n);
        auto co = lemma4_coefficients(f, e, f, e, hh, g);
        const double ex = exact_power_full(hh, VecC::Zero(n), g, MatC::Zero(m, n), e, f);
        CHECK(co.eval(VecC::Zero(n), MatC::Zero(m, n)) == Catch::Approx(ex).margin(1e-8 * (1.0 + ex)));
    }
}

TEST_CASE("nominal precoder matches the single-user matched-filter power") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto s = make_setup(4, 5, 1, 0.0, 0.0, ErrorKind::Bounded, 2.0, seed);
        Rng rng(seed);
        VecC e = rng.unit_phases(5);
        auto res = solve_precoder_nominal(s.est, e, s.qos);
        REQUIRE(res.status == conic::SolveStatus::Optimal);
        CHECK(res.power_mw == Catch::Approx(testutil::mrt_power(s.est, e, s.qos)).epsilon(1e-5));
    }
}

TEST_CASE("nominal precoder meets every rate with equality at the optimum") {
    auto s = make_setup(4, 3, 3, 0.0, 0.0, ErrorKind::Bounded, 1.5, 7);
    Rng rng(7);
    VecC e = rng.unit_phases(3);
    auto res = solve_precoder_nominal(s.est, e, s.qos);
    REQUIRE(res.status == conic::SolveStatus::Optimal);
    for (int k = 0; k < 3; ++k) {
        const double r = achievable_rate(res.precoder, e, s.est.direct_est[k],
                                         s.est.cascaded_est[k], s.qos.noise_power(k), k);
        CHECK(r >= 1.5 - 1e-5);
        CHECK(r <= 1.5 + 1e-3);
    }
}

TEST_CASE("bounded precoder with zero radii equals the nominal optimum") {
    for (auto scenario : {Scenario::PCU, Scenario::FCU}) {
        auto s = make_setup(3, 4, 1, 0.0, 0.0, ErrorKind::Bounded, 2.0, 21);
        Rng rng(21);
        VecC e = rng.unit_phases(4);
        auto nominal = solve_precoder_nominal(s.est, e, s.qos);
        REQUIRE(nominal.status == conic::SolveStatus::Optimal);
        auto res = solve_precoder_bounded(scenario, nominal.precoder, e, s.est, s.model, s.qos);
        REQUIRE(res.status == conic::SolveStatus::Optimal);
        CHECK(res.power_mw == Catch::Approx(testutil::mrt_power(s.est, e, s.qos)).epsilon(0.01));
    }
}

TEST_CASE("larger uncertainty radii never reduce the worst-case power") {
    auto base = make_setup(3, 3, 2, 0.05, 0.0, ErrorKind::Bounded, 1.5, 31);
    Rng rng(31);
    VecC e = rng.unit_phases(3);
    auto nominal = solve_precoder_nominal(base.est, e, base.qos);
    REQUIRE(nominal.status == conic::SolveStatus::Optimal);

    double prev_power = 0.0;
    for (double scale : {0.0, 0.5, 1.0, 1.5}) {
        ErrorModel m = base.model;
        m.xi_g *= scale;
        auto res = solve_precoder_bounded(Scenario::PCU, nominal.precoder, e, base.est, m, base.qos);
        REQUIRE(res.status == conic::SolveStatus::Optimal);
        CHECK(res.power_mw >= prev_power * (1.0 - 1e-6));
        prev_power = res.power_mw;
    }
}

TEST_CASE("s-procedure feasibility implies the sampled robust constraints") {
    for (auto scenario : {Scenario::PCU, Scenario::FCU}) {
        const double dh_level = scenario == Scenario::FCU ? 0.04 : 0.0;
        auto s = make_setup(3, 3, 2, 0.05, dh_level, ErrorKind::Bounded, 1.5, 41);
        Rng rng(41);
        VecC e = rng.unit_phases(3);
        auto nominal = solve_precoder_nominal(s.est, e, s.qos);
        REQUIRE(nominal.status == conic::SolveStatus::Optimal);
        auto res = solve_precoder_bounded(scenario, nominal.precoder, e, s.est, s.model, s.qos);
        REQUIRE(res.status == conic::SolveStatus::Optimal);

        auto users = detail::scale_users(s.est, s.model, s.qos);
        Rng sampler(42);
        for (int k = 0; k < 2; ++k) {
            const auto& u = users[k];
            const double beta_scaled = res.beta(k) / s.qos.noise_power(k);
            MatC fmk(3, 1);
            fmk.col(0) = res.precoder.col(1 - k);
            for (int draw = 0; draw < 1000; ++draw) {
                VecC dgv = uniform_in_ball(sampler, 9, u.xi_g);
                if (draw % 4 == 0 && dgv.norm() > 0) dgv *= u.xi_g / dgv.norm();  // boundary
                const MatC dg = unvec(dgv, 3, 3);
                VecC dh = VecC::Zero(3);
                if (scenario == Scenario::FCU) {
                    dh = uniform_in_ball(sampler, 3, u.xi_h);
                    if (draw % 4 == 1 && dh.norm() > 0) dh *= u.xi_h / dh.norm();
                }
                // worst-case useful signal constraint, Eq. (8)/(26) analog
                const double sig = exact_power_full(u.h, dh, u.g, dg, e, res.precoder.col(k));
                CHECK(sig - beta_scaled * u.rate_factor >= -1e-7);
                // worst-case INs power constraint, Eq. (9)/(31) analog
                const double in_pow =
                    (((u.h + dh).adjoint() + e.adjoint() * (u.g + dg)) * fmk).squaredNorm() + 1.0;
                CHECK(beta_scaled - in_pow >= -1e-7);
            }
        }
    }
}

TEST_CASE("reflect step converges to a unit-modulus solution and keeps feasibility") {
    auto s = make_setup(3, 3, 2, 0.03, 0.0, ErrorKind::Bounded, 1.5, 51);
    Rng rng(51);
    VecC e = rng.unit_phases(3);
    auto nominal = solve_precoder_nominal(s.est, e, s.qos);
    REQUIRE(nominal.status == conic::SolveStatus::Optimal);
    auto pre = solve_precoder_bounded(Scenario::PCU, nominal.precoder, e, s.est, s.model, s.qos);
    REQUIRE(pre.status == conic::SolveStatus::Optimal);

    PenaltyCcpParams params;
    Rng restart_rng(52);
    auto refl = solve_reflect_bounded(Scenario::PCU, pre.precoder, pre.precoder, e, s.est, s.model,
                                      s.qos, params, restart_rng);
    REQUIRE(refl.converged);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(std::abs(refl.e(i)) - 1.0) <= 1e-12);
    CHECK(refl.alphas.minCoeff() >= -1e-9);

    // re-solving the precoder at the new e must not increase the power
    auto pre2 = solve_precoder_bounded(Scenario::PCU, pre.precoder, refl.e, s.est, s.model, s.qos);
    REQUIRE(pre2.status == conic::SolveStatus::Optimal);
    CHECK(pre2.power_mw <= pre.power_mw * (1.0 + 1e-6));
}

TEST_CASE("reflect step restarted at its own fixed point converges in one iteration") {
    auto s = make_setup(2, 1, 1, 0.02, 0.0, ErrorKind::Bounded, 1.0, 61);
    Rng rng(61);
    VecC e = rng.unit_phases(1);
    auto nominal = solve_precoder_nominal(s.est, e, s.qos);
    REQUIRE(nominal.status == conic::SolveStatus::Optimal);
    MatC f = nominal.precoder * 1.5;  // comfortable margin, start is feasible
    PenaltyCcpParams params;
    Rng restart_rng(62);
    auto first = solve_reflect_bounded(Scenario::PCU, f, f, e, s.est, s.model, s.qos, params,
                                       restart_rng);
    REQUIRE(first.converged);
    CHECK(first.restarts == 0);
    // with the penalty at its ceiling the linearized unit-modulus set pins e,
    // so a restart from the converged point stops after a single pass
    PenaltyCcpParams pinned = params;
    pinned.lambda0 = params.lambda_max;
    auto again = solve_reflect_bounded(Scenario::PCU, f, f, first.e, s.est, s.model, s.qos, pinned,
                                       restart_rng);
    REQUIRE(again.converged);
    CHECK(again.inner_iterations == 1);
    CHECK(norm1(again.e - first.e) <= 1e-3);
}

TEST_CASE("bounded alternating optimization on a desk-scale instance") {
    for (auto scenario : {Scenario::PCU, Scenario::FCU}) {
        const double dh_level = scenario == Scenario::FCU ? 0.02 : 0.0;
        auto s = make_setup(3, 3, 2, 0.01, dh_level, ErrorKind::Bounded, 1.5, 71);
        auto [sol, trace] = ao_bounded(scenario, s.est, s.model, s.qos, 71);
        REQUIRE(sol.feasible);
        CHECK(trace.converged);
        CHECK(sol.power_mw > 0.0);
        for (Eigen::Index i = 0; i < sol.reflect.size(); ++i)
            CHECK(std::abs(std::abs(sol.reflect(i)) - 1.0) <= 1e-12);
        // the power trace never increases across accepted precoder steps
        for (std::size_t i = 1; i < trace.power_trace.size(); ++i)
            CHECK(trace.power_trace[i] <= trace.power_trace[i - 1] * (1.0 + 1e-6));
    }
}

TEST_CASE("zero-uncertainty alternating optimization reaches the matched-filter bound") {
    auto s = make_setup(3, 4, 1, 0.0, 0.0, ErrorKind::Bounded, 2.0, 81);
    auto [sol, trace] = ao_bounded(Scenario::PCU, s.est, s.model, s.qos, 81);
    REQUIRE(sol.feasible);
    const double oracle = testutil::mrt_power(s.est, sol.reflect, s.qos);
    CHECK(sol.power_mw == Catch::Approx(oracle).epsilon(0.01));
}
