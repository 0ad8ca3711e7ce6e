#ifndef IRSROBUST_CHANNEL_HPP
#define IRSROBUST_CHANNEL_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "irsrobust/common.hpp"
#include "irsrobust/rng.hpp"
#include "irsrobust/specfun.hpp"

namespace irsrobust {

struct SystemDims {
    int n_bs_antennas = 6;   // N
    int n_irs_elements = 6;  // M
    int n_users = 2;         // K

    void validate() const {
        require(n_bs_antennas >= 1 && n_irs_elements >= 1 && n_users >= 1,
                "SystemDims: all dimensions must be >= 1");
    }
};

/// Node placement and pathloss model. Defaults follow the 3GPP UMi-style
/// setup: BS at the origin, IRS at (50, 10), users uniform in a 5 m disc
/// centered at (70, 0), PL = -PL0 - 10*alpha*log10(d) dB with PL0 = 40 dB.
struct Geometry {
    Eigen::Vector2d bs_pos{0.0, 0.0};
    Eigen::Vector2d irs_pos{50.0, 10.0};
    Eigen::Vector2d user_center{70.0, 0.0};
    double user_radius = 5.0;
    double alpha_bu = 4.0;
    double alpha_bi = 2.2;
    double alpha_iu = 2.0;
    double pl0_db = 40.0;

    void validate() const {
        require(alpha_bu > 0 && alpha_bi > 0 && alpha_iu > 0, "Geometry: exponents must be positive");
        require(user_radius >= 0, "Geometry: user_radius must be nonnegative");
    }

    double pathloss_db(double dist_m, double alpha) const {
        return -pl0_db - 10.0 * alpha * std::log10(dist_m);
    }
};

struct TrueChannels {
    std::vector<VecC> direct;    // h_k, length N
    MatC bs_irs;                 // H_dr, M x N
    std::vector<VecC> irs_user;  // h_{r,k}, length M
    std::vector<MatC> cascaded;  // G_k = diag(conj(h_{r,k})) * H_dr, M x N
    std::vector<Eigen::Vector2d> user_pos;

    int n_users() const { return static_cast<int>(direct.size()); }
};

struct EstimatedChannels {
    std::vector<VecC> direct_est;    // hhat_k
    std::vector<MatC> cascaded_est;  // Ghat_k

    int n_users() const { return static_cast<int>(direct_est.size()); }
};

enum class ErrorKind { Bounded, Statistical };

/// CSI error description. `delta_g`/`delta_h` are the relative uncertainty
/// levels; the per-user radii/variances are derived from them against a
/// concrete channel estimate by `finalize_error_model`.
struct ErrorModel {
    ErrorKind kind = ErrorKind::Statistical;
    double delta_g = 0.0;
    double delta_h = 0.0;  // 0 encodes the partial-uncertainty scenario
    VecR xi_g, xi_h;           // bounded radii
    VecR eps_g_sq, eps_h_sq;   // per-entry Gaussian variances
    VecR outage_rho;

    bool partial() const { return delta_h == 0.0; }
};

struct QosSpec {
    VecR target_rate;  // R_k, bit/s/Hz
    VecR noise_power;  // sigma_k^2, linear mW
    VecR outage_rho;   // rho_k in (0, 1]

    static QosSpec uniform(int n_users, double rate, double noise_dbm = -80.0, double rho = 0.05) {
        QosSpec q;
        q.target_rate = VecR::Constant(n_users, rate);
        q.noise_power = VecR::Constant(n_users, db_to_linear(noise_dbm));
        q.outage_rho = VecR::Constant(n_users, rho);
        return q;
    }

    void validate() const {
        require((target_rate.array() > 0).all(), "QosSpec: target rates must be positive");
        require((noise_power.array() > 0).all(), "QosSpec: noise powers must be positive");
        require((outage_rho.array() > 0).all() && (outage_rho.array() <= 1).all(),
                "QosSpec: outage probabilities must lie in (0,1]");
    }
};

/// Radius xi with Pr{ ||error||_2 <= xi } = 1 - rho for a complex Gaussian
/// error vector of dimension `complex_dim` whose entries have variance
/// eps_sq each: xi = sqrt( (eps_sq / 2) * F^{-1}_{2d}(1 - rho) ).
inline double error_radii(double eps_sq, int complex_dim, double rho) {
    require(eps_sq >= 0.0, "error_radii: eps_sq must be nonnegative");
    require(complex_dim >= 1, "error_radii: complex_dim must be >= 1");
    require(rho > 0.0 && rho < 1.0, "error_radii: rho must lie in (0,1)");
    if (eps_sq == 0.0) return 0.0;
    const double q = chi2_inv_cdf(2.0 * complex_dim, 1.0 - rho);
    return std::sqrt(0.5 * eps_sq * q);
}

inline ErrorModel make_error_model(ErrorKind kind, double delta_g, double delta_h, double rho) {
    require(delta_g >= 0.0 && delta_g < 1.0 && delta_h >= 0.0 && delta_h < 1.0,
            "make_error_model: relative levels must lie in [0,1)");
    ErrorModel m;
    m.kind = kind;
    m.delta_g = delta_g;
    m.delta_h = delta_h;
    m.outage_rho = VecR::Constant(1, rho);
    return m;
}

/// Fills the per-user variances and radii from the estimated channels:
/// eps_g,k^2 = delta_g^2 ||vec(Ghat_k)||^2, eps_h,k^2 = delta_h^2 ||hhat_k||^2,
/// and the bounded radii via the chi-square inverse-CDF rule.
inline void finalize_error_model(ErrorModel& model, const EstimatedChannels& est, double rho) {
    const int k_users = est.n_users();
    const int mn = static_cast<int>(est.cascaded_est[0].size());
    const int n = static_cast<int>(est.direct_est[0].size());
    model.eps_g_sq.resize(k_users);
    model.eps_h_sq.resize(k_users);
    model.xi_g.resize(k_users);
    model.xi_h.resize(k_users);
    model.outage_rho = VecR::Constant(k_users, rho);
    for (int k = 0; k < k_users; ++k) {
        model.eps_g_sq(k) = model.delta_g * model.delta_g * est.cascaded_est[k].squaredNorm();
        model.eps_h_sq(k) = model.delta_h * model.delta_h * est.direct_est[k].squaredNorm();
        model.xi_g(k) = model.eps_g_sq(k) > 0 ? error_radii(model.eps_g_sq(k), mn, rho) : 0.0;
        model.xi_h(k) = model.eps_h_sq(k) > 0 ? error_radii(model.eps_h_sq(k), n, rho) : 0.0;
    }
}

/// Draws a full channel realization: Rayleigh small-scale fading scaled by
/// the square root of the linear pathloss on every link, users placed
/// uniformly in the disc. The same seed reproduces the result bit for bit.
inline TrueChannels generate_scenario(const SystemDims& dims, const Geometry& geom, std::uint64_t seed) {
    dims.validate();
    geom.validate();
    Rng rng(seed);
    const int n = dims.n_bs_antennas, m = dims.n_irs_elements, k_users = dims.n_users;

    TrueChannels ch;
    ch.user_pos.resize(k_users);
    for (int k = 0; k < k_users; ++k) {
        const double r = geom.user_radius * std::sqrt(rng.uniform());
        const double th = 2.0 * M_PI * rng.uniform();
        ch.user_pos[k] = geom.user_center + Eigen::Vector2d(r * std::cos(th), r * std::sin(th));
    }

    const double d_bi = (geom.irs_pos - geom.bs_pos).norm();
    ch.bs_irs = std::sqrt(db_to_linear(geom.pathloss_db(d_bi, geom.alpha_bi))) * rng.cnormal_matrix(m, n);

    ch.direct.resize(k_users);
    ch.irs_user.resize(k_users);
    ch.cascaded.resize(k_users);
    for (int k = 0; k < k_users; ++k) {
        const double d_bu = (ch.user_pos[k] - geom.bs_pos).norm();
        const double d_iu = (ch.user_pos[k] - geom.irs_pos).norm();
        ch.direct[k] = std::sqrt(db_to_linear(geom.pathloss_db(d_bu, geom.alpha_bu))) * rng.cnormal_vector(n);
        ch.irs_user[k] = std::sqrt(db_to_linear(geom.pathloss_db(d_iu, geom.alpha_iu))) * rng.cnormal_vector(m);
        ch.cascaded[k] = ch.irs_user[k].conjugate().asDiagonal() * ch.bs_irs;
    }
    return ch;
}

/// Uniform draw from the complex ball { ||x||_2 <= radius } of dimension d:
/// Gaussian direction with radius scaled by U^(1/(2d)).
inline VecC uniform_in_ball(Rng& rng, Eigen::Index d, double radius) {
    if (radius == 0.0) return VecC::Zero(d);
    VecC dir = rng.cnormal_vector(d);
    const double nrm = dir.norm();
    if (nrm == 0.0) return VecC::Zero(d);
    const double r = radius * std::pow(rng.uniform(), 1.0 / (2.0 * static_cast<double>(d)));
    return (r / nrm) * dir;
}

/// Splits truth into estimate + error with the error drawn per the model:
/// statistical errors are entrywise CN(0, eps^2); bounded errors are uniform
/// in the norm ball. Error magnitudes are set from the relative levels
/// against the true channel norms (the estimate is what remains).
inline EstimatedChannels perturb_channels(const TrueChannels& truth, const ErrorModel& model,
                                          std::uint64_t seed) {
    Rng rng(seed);
    const int k_users = truth.n_users();
    const int m = static_cast<int>(truth.bs_irs.rows());
    const int n = static_cast<int>(truth.bs_irs.cols());
    const double rho = model.outage_rho.size() > 0 ? model.outage_rho(0) : 0.05;

    EstimatedChannels est;
    est.direct_est.resize(k_users);
    est.cascaded_est.resize(k_users);
    for (int k = 0; k < k_users; ++k) {
        const double eg_sq = model.delta_g * model.delta_g * truth.cascaded[k].squaredNorm();
        const double eh_sq = model.delta_h * model.delta_h * truth.direct[k].squaredNorm();
        VecC dg, dh;
        if (model.kind == ErrorKind::Statistical) {
            dg = std::sqrt(eg_sq) * rng.cnormal_vector(m * n);
            dh = std::sqrt(eh_sq) * rng.cnormal_vector(n);
        } else {
            const double xi_g = eg_sq > 0 ? error_radii(eg_sq, m * n, rho) : 0.0;
            const double xi_h = eh_sq > 0 ? error_radii(eh_sq, n, rho) : 0.0;
            dg = uniform_in_ball(rng, m * n, xi_g);
            dh = uniform_in_ball(rng, n, xi_h);
        }
        est.cascaded_est[k] = truth.cascaded[k] - unvec(dg, m, n);
        est.direct_est[k] = truth.direct[k] - dh;
    }
    return est;
}

/// Eq.-(2)-style achievable rate of user k in bit/s/Hz.
inline double achievable_rate(const MatC& precoder, const VecC& reflect, const VecC& h_k,
                              const MatC& g_k, double sigma_sq, int k) {
    const int n = static_cast<int>(precoder.rows());
    const int k_users = static_cast<int>(precoder.cols());
    require(k >= 0 && k < k_users, "achievable_rate: user index out of range");
    require(h_k.size() == n && g_k.cols() == n && g_k.rows() == reflect.size(),
            "achievable_rate: dimension mismatch");
    for (Eigen::Index i = 0; i < reflect.size(); ++i)
        require(std::abs(std::abs(reflect(i)) - 1.0) <= 1e-9,
                "achievable_rate: reflection coefficients must be unit modulus");

    Eigen::RowVectorXcd eff = h_k.adjoint() + reflect.adjoint() * g_k;
    const double sig = std::norm((eff * precoder.col(k)).value());
    double in_power = sigma_sq;
    for (int j = 0; j < k_users; ++j)
        if (j != k) in_power += std::norm((eff * precoder.col(j)).value());
    return std::log2(1.0 + sig / in_power);
}

}  // namespace irsrobust

#endif
