#include <catch2/catch_amalgamated.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include "irsrobust/channel.hpp"

using namespace irsrobust;

TEST_CASE("pathloss formula matches the stated reference values") {
    Geometry geom;
    CHECK(geom.pathloss_db(1.0, 4.0) == Catch::Approx(-40.0));
    CHECK(geom.pathloss_db(50.0, 2.2) == Catch::Approx(-40.0 - 22.0 * std::log10(50.0)).epsilon(1e-12));
    CHECK(geom.pathloss_db(50.0, 2.2) == Catch::Approx(-77.3772).margin(1e-3));
}

TEST_CASE("same seed reproduces the scenario bit for bit") {
    SystemDims dims{4, 5, 3};
    Geometry geom;
    auto a = generate_scenario(dims, geom, 1234);
    auto b = generate_scenario(dims, geom, 1234);
    CHECK(a.bs_irs == b.bs_irs);
    for (int k = 0; k < 3; ++k) {
        CHECK(a.direct[k] == b.direct[k]);
        CHECK(a.cascaded[k] == b.cascaded[k]);
    }
    auto c = generate_scenario(dims, geom, 1235);
    CHECK(a.bs_irs != c.bs_irs);
}

TEST_CASE("cascaded channels satisfy the diag(conj(h_r)) H_dr identity") {
    SystemDims dims{3, 4, 2};
    auto ch = generate_scenario(dims, Geometry{}, 77);
    for (int k = 0; k < dims.n_users; ++k) {
        const MatC rebuilt = ch.irs_user[k].conjugate().asDiagonal() * ch.bs_irs;
        CHECK((ch.cascaded[k] - rebuilt).norm() < 1e-12);
        for (int m = 0; m < dims.n_irs_elements; ++m)
            CHECK((ch.cascaded[k].row(m) - std::conj(ch.irs_user[k](m)) * ch.bs_irs.row(m)).norm() < 1e-14);
    }
}

TEST_CASE("error_radii closed forms and monotonicity") {
    // chi^2 with 2 dof: F^{-1}(1-rho) = -2 ln rho
    CHECK(error_radii(2.0, 1, 0.05) == Catch::Approx(std::sqrt(-2.0 * std::log(0.05))).epsilon(1e-10));
    CHECK(error_radii(2.0, 1, 0.05) == Catch::Approx(2.4477).margin(1e-4));
    CHECK(error_radii(0.0, 4, 0.05) == 0.0);

    double prev = error_radii(1.0, 3, 0.999);
    for (double rho : {0.9, 0.5, 0.1, 0.01}) {
        const double xi = error_radii(1.0, 3, rho);
        CHECK(xi > prev);
        prev = xi;
    }
    CHECK(error_radii(1.0, 3, 0.9999) > 0.0);
    CHECK_THROWS_AS(error_radii(1.0, 3, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(error_radii(1.0, 3, 1.0), std::invalid_argument);
}

TEST_CASE("chi-square inverse CDF agrees with boost over a grid") {
    for (int dof : {2, 4, 12, 48, 72}) {
        boost::math::chi_squared dist(dof);
        for (double p : {0.05, 0.5, 0.9, 0.95, 0.99}) {
            const double ours = chi2_inv_cdf(dof, p);
            const double ref = boost::math::quantile(dist, p);
            CHECK(ours == Catch::Approx(ref).epsilon(1e-9));
        }
    }
}

static TrueChannels scalar_truth(cxd g, cxd h) {
    TrueChannels t;
    t.bs_irs = MatC::Constant(1, 1, g);
    t.irs_user = {VecC::Constant(1, 1.0)};
    t.direct = {VecC::Constant(1, h)};
    t.cascaded = {t.irs_user[0].conjugate().asDiagonal() * t.bs_irs};
    t.user_pos = {Eigen::Vector2d::Zero()};
    return t;
}

TEST_CASE("zero error levels reproduce the truth exactly") {
    auto truth = generate_scenario({3, 4, 2}, Geometry{}, 5);
    auto model = make_error_model(ErrorKind::Statistical, 0.0, 0.0, 0.05);
    auto est = perturb_channels(truth, model, 99);
    for (int k = 0; k < 2; ++k) {
        CHECK(est.direct_est[k] == truth.direct[k]);
        CHECK(est.cascaded_est[k] == truth.cascaded[k]);
    }
}

TEST_CASE("statistical perturbation has the stated second moment") {
    // M = N = 1, |G| = 1, delta_g = 1 makes eps_g^2 = 1
    auto truth = scalar_truth(1.0, 0.5);
    auto model = make_error_model(ErrorKind::Statistical, 1.0 - 1e-12, 0.0, 0.05);
    model.delta_g = 1.0;  // relative level of exactly one
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        auto est = perturb_channels(truth, model, Rng::key(1, 0, i));
        acc += std::norm(truth.cascaded[0](0, 0) - est.cascaded_est[0](0, 0));
    }
    CHECK(acc / n > 0.99);
    CHECK(acc / n < 1.01);
}

TEST_CASE("bounded perturbation never leaves the ball") {
    auto truth = generate_scenario({2, 3, 1}, Geometry{}, 11);
    auto model = make_error_model(ErrorKind::Bounded, 0.3, 0.1, 0.05);
    const double eg_sq = model.delta_g * model.delta_g * truth.cascaded[0].squaredNorm();
    const double eh_sq = model.delta_h * model.delta_h * truth.direct[0].squaredNorm();
    const double xi_g = error_radii(eg_sq, 6, 0.05);
    const double xi_h = error_radii(eh_sq, 2, 0.05);
    for (int i = 0; i < 2000; ++i) {
        auto est = perturb_channels(truth, model, Rng::key(2, 0, i));
        CHECK((truth.cascaded[0] - est.cascaded_est[0]).norm() <= xi_g * (1 + 1e-12));
        CHECK((truth.direct[0] - est.direct_est[0]).norm() <= xi_h * (1 + 1e-12));
    }
}

TEST_CASE("derived radius covers 1-rho of the statistical draws") {
    const double rho = 0.05;
    auto truth = generate_scenario({2, 2, 1}, Geometry{}, 21);
    auto model = make_error_model(ErrorKind::Statistical, 0.1, 0.0, rho);
    const double eg_sq = model.delta_g * model.delta_g * truth.cascaded[0].squaredNorm();
    const double xi_g = error_radii(eg_sq, 4, rho);
    int inside = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        auto est = perturb_channels(truth, model, Rng::key(3, 0, i));
        if ((truth.cascaded[0] - est.cascaded_est[0]).norm() <= xi_g) ++inside;
    }
    const double frac = static_cast<double>(inside) / n;
    CHECK(frac >= 1 - rho - 0.01);
    CHECK(frac <= 1 - rho + 0.01);
}

TEST_CASE("finalize_error_model applies the stated definitions") {
    auto truth = generate_scenario({3, 4, 2}, Geometry{}, 8);
    auto model = make_error_model(ErrorKind::Statistical, 0.02, 0.05, 0.05);
    auto est = perturb_channels(truth, model, 9);
    finalize_error_model(model, est, 0.05);
    for (int k = 0; k < 2; ++k) {
        CHECK(model.eps_g_sq(k) ==
              Catch::Approx(0.02 * 0.02 * est.cascaded_est[k].squaredNorm()).epsilon(1e-12));
        CHECK(model.eps_h_sq(k) ==
              Catch::Approx(0.05 * 0.05 * est.direct_est[k].squaredNorm()).epsilon(1e-12));
        CHECK(model.xi_g(k) == Catch::Approx(error_radii(model.eps_g_sq(k), 12, 0.05)).epsilon(1e-12));
    }
}

TEST_CASE("achievable rate trivial values") {
    const int n = 3, m = 2;
    Rng rng(4);
    VecC e = rng.unit_phases(m);
    VecC h = rng.cnormal_vector(n);
    MatC g = rng.cnormal_matrix(m, n);

    MatC f0 = MatC::Zero(n, 2);
    CHECK(achievable_rate(f0, e, h, g, 1.0, 0) == 0.0);

    // single user, unit noise, unit received signal power -> rate 1
    Eigen::RowVectorXcd eff = h.adjoint() + e.adjoint() * g;
    MatC f1 = eff.adjoint() / eff.norm() / eff.norm();
    f1 *= 1.0 / std::sqrt((eff * f1.col(0)).cwiseAbs2().value());
    CHECK(achievable_rate(f1, e, h, g, 1.0, 0) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("achievable rate matches an explicit SINR recomputation") {
    const int n = 4, m = 3, k_users = 2;
    Rng rng(5);
    VecC e = rng.unit_phases(m);
    MatC f = rng.cnormal_matrix(n, k_users);
    for (int k = 0; k < k_users; ++k) {
        VecC h = rng.cnormal_vector(n);
        MatC g = rng.cnormal_matrix(m, n);
        const double sigma_sq = 0.7;
        // from-scratch oracle
        cxd sig = 0;
        for (int i = 0; i < n; ++i) {
            cxd chan = std::conj(h(i));
            for (int mm = 0; mm < m; ++mm) chan += std::conj(e(mm)) * g(mm, i);
            sig += chan * f(i, k);
        }
        double interf = 0;
        for (int j = 0; j < k_users; ++j) {
            if (j == k) continue;
            cxd t = 0;
            for (int i = 0; i < n; ++i) {
                cxd chan = std::conj(h(i));
                for (int mm = 0; mm < m; ++mm) chan += std::conj(e(mm)) * g(mm, i);
                t += chan * f(i, j);
            }
            interf += std::norm(t);
        }
        const double oracle = std::log2(1.0 + std::norm(sig) / (interf + sigma_sq));
        CHECK(achievable_rate(f, e, h, g, sigma_sq, k) == Catch::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("scaling the own precoder column strictly increases the rate") {
    const int n = 3, m = 2, k_users = 2;
    Rng rng(6);
    VecC e = rng.unit_phases(m);
    VecC h = rng.cnormal_vector(n);
    MatC g = rng.cnormal_matrix(m, n);
    MatC f = rng.cnormal_matrix(n, k_users);
    const double base = achievable_rate(f, e, h, g, 0.5, 0);
    for (double c : {1.1, 2.0, 10.0}) {
        MatC f2 = f;
        f2.col(0) *= c;
        CHECK(achievable_rate(f2, e, h, g, 0.5, 0) > base);
    }
}

TEST_CASE("achievable rate validates its inputs") {
    Rng rng(7);
    MatC f = rng.cnormal_matrix(3, 1);
    VecC e = VecC::Constant(2, cxd(0.5, 0.0));  // not unit modulus
    CHECK_THROWS_AS(achievable_rate(f, e, rng.cnormal_vector(3), rng.cnormal_matrix(2, 3), 1.0, 0),
                    std::invalid_argument);
    VecC eu = rng.unit_phases(2);
    CHECK_THROWS_AS(achievable_rate(f, eu, rng.cnormal_vector(4), rng.cnormal_matrix(2, 3), 1.0, 0),
                    std::invalid_argument);
}
