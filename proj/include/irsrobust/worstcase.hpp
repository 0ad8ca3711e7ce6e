#ifndef IRSROBUST_WORSTCASE_HPP
#define IRSROBUST_WORSTCASE_HPP

#include <chrono>
#include <optional>

#include "irsrobust/channel.hpp"
#include "irsrobust/conic/program.hpp"
#include "irsrobust/conic/solver.hpp"
#include "irsrobust/pccp.hpp"
#include "irsrobust/solution.hpp"

namespace irsrobust {

/// Complex vector view of interleaved (re, im) variable pairs.
inline VecC cx_segment(const VecR& x, int offset, int len) {
    VecC v(len);
    for (int i = 0; i < len; ++i) v(i) = cxd(x(offset + 2 * i), x(offset + 2 * i + 1));
    return v;
}

/// Column-major complex matrix from interleaved pairs.
inline MatC cx_matrix(const VecR& x, int offset, int rows, int cols) {
    MatC m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) {
            const int base = offset + 2 * (j * rows + i);
            m(i, j) = cxd(x(base), x(base + 1));
        }
    return m;
}

/// Quadratic lower bound of the useful signal power under cascaded-channel
/// error, as a form in x = vec(dG^*):
///   x^H A x + 2 Re{ a^T x } + a_scalar.
struct Lemma3Coefficients {
    MatC a_mat;
    VecC a_vec;
    double a_scalar = 0.0;

    double eval(const MatC& dg) const {
        const VecC x = vec(dg.conjugate());
        const double quad = std::real((x.adjoint() * a_mat * x).value());
        const double lin = 2.0 * std::real((a_vec.transpose() * x).value());
        return quad + lin + a_scalar;
    }
};

inline Lemma3Coefficients lemma3_coefficients(const VecC& f, const VecC& e, const VecC& f_prev,
                                              const VecC& e_prev, const VecC& h, const MatC& g_hat) {
    Lemma3Coefficients c;
    const cxd x_prev = ((h.adjoint() + e_prev.adjoint() * g_hat) * f_prev).value();
    const cxd x_cross = ((h.adjoint() + e.adjoint() * g_hat) * f).value();

    c.a_mat = kron(f * f_prev.adjoint(), e.conjugate() * e_prev.transpose()) +
              kron(f_prev * f.adjoint(), e_prev.conjugate() * e.transpose()) -
              kron(f_prev * f_prev.adjoint(), e_prev.conjugate() * e_prev.transpose());

    c.a_vec = vec(e * (x_prev * f.adjoint())) +
              vec(e_prev * (x_cross * f_prev.adjoint())) -
              vec(e_prev * (x_prev * f_prev.adjoint()));

    const cxd d = x_prev * (f.adjoint() * (h + g_hat.adjoint() * e)).value();
    const double z = std::norm(x_prev);
    c.a_scalar = 2.0 * std::real(d) - z;
    return c;
}

/// Full-uncertainty analog over the stacked error x = [dh; vec(dG^*)]:
///   x^H A x + 2 Re{ a^H x } + a_scalar.
struct Lemma4Coefficients {
    MatC a_mat;
    VecC a_vec;
    double a_scalar = 0.0;

    double eval(const VecC& dh, const MatC& dg) const {
        VecC x(dh.size() + dg.size());
        x.head(dh.size()) = dh;
        x.tail(dg.size()) = vec(dg.conjugate());
        const double quad = std::real((x.adjoint() * a_mat * x).value());
        const double lin = 2.0 * std::real((a_vec.adjoint() * x).value());
        return quad + lin + a_scalar;
    }
};

inline Lemma4Coefficients lemma4_coefficients(const VecC& f, const VecC& e, const VecC& f_prev,
                                              const VecC& e_prev, const VecC& h_hat,
                                              const MatC& g_hat) {
    Lemma4Coefficients c;
    const Eigen::Index n = f.size();
    const Eigen::Index mn = g_hat.size();

    VecC left(n + mn), right(n + mn);
    left.head(n) = f_prev;
    left.tail(mn) = kron(f_prev, e_prev.conjugate());
    right.head(n) = f;
    right.tail(mn) = kron(f, e.conjugate());  // conjugated below through adjoint

    const MatC d_mat = left * right.adjoint();
    const MatC z_mat = left * left.adjoint();
    c.a_mat = d_mat + d_mat.adjoint() - z_mat;

    const cxd x_prev = ((h_hat.adjoint() + e_prev.adjoint() * g_hat) * f_prev).value();
    const cxd x_cross = ((h_hat.adjoint() + e.adjoint() * g_hat) * f).value();

    VecC d1(n + mn), d2(n + mn), zv(n + mn);
    d1.head(n) = f * (f_prev.adjoint() * (h_hat + g_hat.adjoint() * e_prev)).value();
    d1.tail(mn) = vec(e * (x_prev * f.adjoint())).conjugate();
    d2.head(n) = f_prev * (f.adjoint() * (h_hat + g_hat.adjoint() * e)).value();
    d2.tail(mn) = vec(e_prev * (x_cross * f_prev.adjoint())).conjugate();
    zv.head(n) = f_prev * (f_prev.adjoint() * (h_hat + g_hat.adjoint() * e_prev)).value();
    zv.tail(mn) = vec(e_prev * (x_prev * f_prev.adjoint())).conjugate();
    c.a_vec = d1 + d2 - zv;

    const cxd d = x_prev * (f.adjoint() * (h_hat + g_hat.adjoint() * e)).value();
    c.a_scalar = 2.0 * std::real(d) - std::norm(x_prev);
    return c;
}

namespace detail {

/// Per-user channel data normalized by the noise standard deviation, so
/// the conic programs see O(1) noise instead of 1e-8 mW.
struct ScaledUser {
    VecC h;
    MatC g;
    double xi_g = 0.0;
    double xi_h = 0.0;
    double rate_factor = 0.0;  // 2^R - 1
};

inline std::vector<ScaledUser> scale_users(const EstimatedChannels& est, const ErrorModel& model,
                                           const QosSpec& qos) {
    std::vector<ScaledUser> users(est.n_users());
    for (int k = 0; k < est.n_users(); ++k) {
        const double sigma = std::sqrt(qos.noise_power(k));
        users[k].h = est.direct_est[k] / sigma;
        users[k].g = est.cascaded_est[k] / sigma;
        users[k].xi_g = model.xi_g.size() > 0 ? model.xi_g(k) / sigma : 0.0;
        users[k].xi_h = model.xi_h.size() > 0 ? model.xi_h(k) / sigma : 0.0;
        users[k].rate_factor = std::pow(2.0, qos.target_rate(k)) - 1.0;
    }
    return users;
}

inline double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace detail

struct PrecoderStepResult {
    conic::SolveStatus status = conic::SolveStatus::NumericalFailure;
    MatC precoder;
    VecR beta;   // linear mW
    VecR duals;
    double power_mw = 0.0;
};

/// Nominal (zero-uncertainty) power minimization at fixed reflect vector:
/// the classic per-user SINR second-order cone program. Also serves as the
/// no-IRS baseline when `g` entries are absent (reflect empty).
inline PrecoderStepResult solve_precoder_nominal(const EstimatedChannels& est, const VecC& e,
                                                 const QosSpec& qos, double solver_tol = 1e-8) {
    const int n = static_cast<int>(est.direct_est[0].size());
    const int k_users = est.n_users();
    ErrorModel zero;  // radii ignored by the nominal program
    auto users = detail::scale_users(est, zero, qos);
    const int nv = 2 * n * k_users + 1;
    const int t_idx = 2 * n * k_users;
    conic::ConicProgram prog(nv);
    VecR c = VecR::Zero(nv);
    c(t_idx) = 1.0;
    prog.set_objective(c);

    MatR obj_soc = MatR::Zero(1 + 2 * n * k_users, nv);
    obj_soc(0, t_idx) = 1.0;
    obj_soc.block(1, 0, 2 * n * k_users, 2 * n * k_users).setIdentity();
    prog.add_soc(obj_soc, VecR::Zero(1 + 2 * n * k_users));

    for (int k = 0; k < k_users; ++k) {
        Eigen::RowVectorXcd eff = users[k].h.adjoint();
        if (e.size() > 0) eff += e.adjoint() * users[k].g;
        const double gamma = users[k].rate_factor;
        prog.add_soc_from_map(1 + 2 * (k_users - 1) + 1, [&, k, eff, gamma](const VecR& x) {
            const MatC f = cx_matrix(x, 0, n, k_users);
            VecR v(1 + 2 * (k_users - 1) + 1);
            v(0) = std::real((eff * f.col(k)).value()) / std::sqrt(gamma);
            int idx = 1;
            for (int j = 0; j < k_users; ++j) {
                if (j == k) continue;
                const cxd t = (eff * f.col(j)).value();
                v(idx++) = std::real(t);
                v(idx++) = std::imag(t);
            }
            v(idx) = 1.0;
            return v;
        });
    }
    auto sol = conic::solve(prog, solver_tol);
    PrecoderStepResult out;
    out.status = sol.status;
    if (sol.status == conic::SolveStatus::Optimal) {
        out.precoder = cx_matrix(sol.x, 0, n, k_users);
        out.power_mw = out.precoder.squaredNorm();
        out.beta = VecR::Zero(k_users);
        for (int k = 0; k < k_users; ++k) {
            Eigen::RowVectorXcd eff = est.direct_est[k].adjoint();
            if (e.size() > 0) eff += e.adjoint() * est.cascaded_est[k];
            double b = qos.noise_power(k);
            for (int j = 0; j < k_users; ++j)
                if (j != k) b += std::norm((eff * out.precoder.col(j)).value());
            out.beta(k) = b;
        }
        out.duals = sol.dual;
    }
    return out;
}

namespace detail {

/// Rescaled S-procedure signal LMI. Congruence by diag(xi_h I, xi_g I, 1)
/// turns Eq. (14)/(29) into an equivalent LMI whose multipliers
/// varpi' = varpi xi^2 stay O(1); inactive (zero-radius) error blocks are
/// dropped, and with no active block the constraint is the linear row
/// a_scalar >= beta(2^R - 1) + alpha.
struct SignalLmiSpec {
    bool g_active = false;
    bool h_active = false;  // implies the stacked Lemma-4 form
    int n = 0, mn = 0;
};

template <typename CoeffFn>
void add_signal_constraint(conic::ConicProgram& prog, const SignalLmiSpec& spec, double xi_g,
                           double xi_h, double rate_factor, int beta_idx, int varpi_g_idx,
                           int varpi_h_idx, int alpha_idx, const CoeffFn& coeffs) {
    const int n = spec.n, mn = spec.mn;
    auto corner = [=](const VecR& x, double a_scalar) {
        double c = a_scalar - x(beta_idx) * rate_factor;
        if (varpi_g_idx >= 0) c -= x(varpi_g_idx);
        if (varpi_h_idx >= 0) c -= x(varpi_h_idx);
        if (alpha_idx >= 0) c -= x(alpha_idx);
        return c;
    };

    if (!spec.g_active && !spec.h_active) {
        // zero-radius degenerate case: pointwise constraint at zero error
        prog.add_linear_ge_from_map([=](const VecR& x) {
            const auto co = coeffs(x);
            return corner(x, co.a_scalar);
        });
        return;
    }

    if (!spec.h_active) {
        prog.add_psd_from_hermitian_map(mn + 1, [=](const VecR& x) {
            const auto co = coeffs(x);
            MatC h = MatC::Zero(mn + 1, mn + 1);
            h.topLeftCorner(mn, mn) = (xi_g * xi_g) * co.a_mat.bottomRightCorner(mn, mn);
            h.topLeftCorner(mn, mn).diagonal().array() += x(varpi_g_idx);
            h.block(0, mn, mn, 1) = xi_g * co.a_vec.tail(mn);
            h.block(mn, 0, 1, mn) = xi_g * co.a_vec.tail(mn).adjoint();
            h(mn, mn) = corner(x, co.a_scalar);
            return h;
        });
        return;
    }

    prog.add_psd_from_hermitian_map(n + mn + 1, [=](const VecR& x) {
        const auto co = coeffs(x);
        MatC h = MatC::Zero(n + mn + 1, n + mn + 1);
        h.topLeftCorner(n, n) = (xi_h * xi_h) * co.a_mat.topLeftCorner(n, n);
        h.topLeftCorner(n, n).diagonal().array() += x(varpi_h_idx);
        h.block(0, n, n, mn) = (xi_h * xi_g) * co.a_mat.topRightCorner(n, mn);
        h.block(n, 0, mn, n) = (xi_h * xi_g) * co.a_mat.bottomLeftCorner(mn, n);
        h.block(n, n, mn, mn) = (xi_g * xi_g) * co.a_mat.bottomRightCorner(mn, mn);
        h.block(n, n, mn, mn).diagonal().array() += x(varpi_g_idx);
        h.block(0, n + mn, n, 1) = xi_h * co.a_vec.head(n);
        h.block(n, n + mn, mn, 1) = xi_g * co.a_vec.tail(mn);
        h.block(n + mn, 0, 1, n) = xi_h * co.a_vec.head(n).adjoint();
        h.block(n + mn, n, 1, mn) = xi_g * co.a_vec.tail(mn).adjoint();
        h(n + mn, n + mn) = corner(x, co.a_scalar);
        return h;
    });
}

/// Stacked-error view of the Lemma 3 coefficients (zero direct-error rows)
/// so both scenarios share one LMI assembly path.
inline Lemma4Coefficients stack_lemma3(const Lemma3Coefficients& c3, int n) {
    Lemma4Coefficients c;
    const Eigen::Index mn = c3.a_vec.size();
    c.a_mat = MatC::Zero(n + mn, n + mn);
    c.a_mat.bottomRightCorner(mn, mn) = c3.a_mat;
    c.a_vec = VecC::Zero(n + mn);
    c.a_vec.tail(mn) = c3.a_vec.conjugate();  // 2Re{a^T x} = 2Re{(a*)^H x}
    c.a_scalar = c3.a_scalar;
    return c;
}

}  // namespace detail

/// Precoder subproblem of the worst-case design: S-procedure signal LMIs
/// and sign-definiteness IN LMIs around the linearization point
/// (f_lin, e_lin), with the reflect vector held at e_lin.
inline PrecoderStepResult solve_precoder_bounded(Scenario scenario, const MatC& f_lin,
                                                 const VecC& e_lin, const EstimatedChannels& est,
                                                 const ErrorModel& model, const QosSpec& qos,
                                                 double solver_tol = 1e-8) {
    const int n = static_cast<int>(est.direct_est[0].size());
    const int m = static_cast<int>(est.cascaded_est[0].rows());
    const int k_users = est.n_users();
    const int mn = m * n;
    auto users = detail::scale_users(est, model, qos);
    const bool fcu = scenario == Scenario::FCU;

    const int nf = 2 * n * k_users;
    const int t_idx = nf;
    const int beta0 = nf + 1;
    int next = beta0 + k_users;
    std::vector<int> varpi_g(k_users, -1), mu_g(k_users, -1), varpi_h(k_users, -1),
        mu_h(k_users, -1);
    for (int k = 0; k < k_users; ++k) {
        if (users[k].xi_g > 0) {
            varpi_g[k] = next++;
            mu_g[k] = next++;
        }
        if (fcu && users[k].xi_h > 0) {
            varpi_h[k] = next++;
            mu_h[k] = next++;
        }
    }
    const int nv = next;

    conic::ConicProgram prog(nv);
    VecR c = VecR::Zero(nv);
    c(t_idx) = 1.0;
    prog.set_objective(c);

    MatR obj_soc = MatR::Zero(1 + nf, nv);
    obj_soc(0, t_idx) = 1.0;
    obj_soc.block(1, 0, nf, nf).setIdentity();
    prog.add_soc(obj_soc, VecR::Zero(1 + nf));

    for (int k = 0; k < k_users; ++k) {
        const auto& u = users[k];
        const VecC fl = f_lin.col(k);

        detail::SignalLmiSpec spec;
        spec.n = n;
        spec.mn = mn;
        spec.g_active = u.xi_g > 0;
        spec.h_active = fcu && u.xi_h > 0;
        detail::add_signal_constraint(
            prog, spec, u.xi_g, u.xi_h, u.rate_factor, beta0 + k, varpi_g[k], varpi_h[k], -1,
            [&, k, fl](const VecR& x) {
                const VecC f = cx_segment(x, 2 * n * k, n);
                if (fcu) return lemma4_coefficients(f, e_lin, fl, e_lin, u.h, u.g);
                return detail::stack_lemma3(lemma3_coefficients(f, e_lin, fl, e_lin, u.h, u.g), n);
            });

        // IN LMI, Eq. (18)/(32); borders only for active error blocks
        const int km1 = k_users - 1;
        const bool bg = u.xi_g > 0, bh = fcu && u.xi_h > 0;
        const int dim_in = 1 + km1 + (bg ? n : 0) + (bh ? n : 0);
        prog.add_psd_from_hermitian_map(dim_in, [&, k, bg, bh, km1, dim_in](const VecR& x) {
            const MatC f = cx_matrix(x, 0, n, k_users);
            MatC fmk(n, km1);
            for (int j = 0, idx = 0; j < k_users; ++j)
                if (j != k) fmk.col(idx++) = f.col(j);
            const VecC th = fmk.adjoint() * (u.h + u.g.adjoint() * e_lin);
            MatC hmat = MatC::Zero(dim_in, dim_in);
            double corner = x(beta0 + k) - 1.0;
            if (bg) corner -= x(mu_g[k]) * static_cast<double>(m);
            if (bh) corner -= x(mu_h[k]);
            hmat(0, 0) = corner;
            hmat.block(1, 0, km1, 1) = th;
            hmat.block(0, 1, 1, km1) = th.adjoint();
            hmat.block(1, 1, km1, km1) = MatC::Identity(km1, km1);
            int off = 1 + km1;
            if (bg) {
                hmat.block(off, 1, n, km1) = u.xi_g * fmk;
                hmat.block(1, off, km1, n) = u.xi_g * fmk.adjoint();
                hmat.block(off, off, n, n) = x(mu_g[k]) * MatC::Identity(n, n);
                off += n;
            }
            if (bh) {
                hmat.block(off, 1, n, km1) = u.xi_h * fmk;
                hmat.block(1, off, km1, n) = u.xi_h * fmk.adjoint();
                hmat.block(off, off, n, n) = x(mu_h[k]) * MatC::Identity(n, n);
            }
            return hmat;
        });

        for (int idx : {varpi_g[k], mu_g[k], varpi_h[k], mu_h[k]})
            if (idx >= 0) prog.add_var_ge(idx, 0.0);
    }

    auto sol = conic::solve(prog, solver_tol);
    PrecoderStepResult out;
    out.status = sol.status;
    if (sol.status == conic::SolveStatus::Optimal) {
        out.precoder = cx_matrix(sol.x, 0, n, k_users);
        out.power_mw = out.precoder.squaredNorm();
        out.beta = VecR::Zero(k_users);
        for (int k = 0; k < k_users; ++k) out.beta(k) = sol.x(beta0 + k) * qos.noise_power(k);
        out.duals = sol.dual;
    }
    return out;
}

struct ReflectStepResult {
    bool converged = false;
    VecC e;
    VecR alphas;
    int inner_iterations = 0;
    int restarts = 0;
};

/// Reflect-vector subproblem: slack-augmented signal LMIs, the reduced
/// K x K IN blocks, and penalty-CCP handling of the unit-modulus set.
inline ReflectStepResult solve_reflect_bounded(Scenario scenario, const MatC& f_fixed,
                                               const MatC& f_lin, const VecC& e_lin,
                                               const EstimatedChannels& est, const ErrorModel& model,
                                               const QosSpec& qos, const PenaltyCcpParams& params,
                                               Rng& rng, double solver_tol = 1e-8) {
    const int n = static_cast<int>(est.direct_est[0].size());
    const int m = static_cast<int>(est.cascaded_est[0].rows());
    const int k_users = est.n_users();
    const int mn = m * n;
    auto users = detail::scale_users(est, model, qos);
    const bool fcu = scenario == Scenario::FCU;

    const int e0_idx = 0;
    const int alpha0 = 2 * m;
    const int beta0 = alpha0 + k_users;
    int next = beta0 + k_users;
    std::vector<int> varpi_g(k_users, -1), mu_g(k_users, -1), varpi_h(k_users, -1),
        mu_h(k_users, -1);
    for (int k = 0; k < k_users; ++k) {
        if (users[k].xi_g > 0) {
            varpi_g[k] = next++;
            mu_g[k] = next++;
        }
        if (fcu && users[k].xi_h > 0) {
            varpi_h[k] = next++;
            mu_h[k] = next++;
        }
    }
    const int b0 = next;
    const int nv = b0 + 2 * m;

    conic::ConicProgram prog(nv);

    for (int k = 0; k < k_users; ++k) {
        const auto& u = users[k];
        const VecC fk = f_fixed.col(k);
        const VecC fl = f_lin.col(k);

        detail::SignalLmiSpec spec;
        spec.n = n;
        spec.mn = mn;
        spec.g_active = u.xi_g > 0;
        spec.h_active = fcu && u.xi_h > 0;
        detail::add_signal_constraint(
            prog, spec, u.xi_g, u.xi_h, u.rate_factor, beta0 + k, varpi_g[k], varpi_h[k],
            alpha0 + k, [&, k, fk, fl](const VecR& x) {
                const VecC e = cx_segment(x, e0_idx, m);
                if (fcu) return lemma4_coefficients(fk, e, fl, e_lin, u.h, u.g);
                return detail::stack_lemma3(lemma3_coefficients(fk, e, fl, e_lin, u.h, u.g), n);
            });

        // reduced IN LMI, Eq. (23): only the K x K corner depends on e
        const int km1 = k_users - 1;
        prog.add_psd_from_hermitian_map(1 + km1, [&, k, km1](const VecR& x) {
            const VecC e = cx_segment(x, e0_idx, m);
            MatC fmk(n, km1);
            for (int j = 0, idx = 0; j < k_users; ++j)
                if (j != k) fmk.col(idx++) = f_fixed.col(j);
            const VecC th = fmk.adjoint() * (u.h + u.g.adjoint() * e);
            MatC hmat = MatC::Zero(1 + km1, 1 + km1);
            double corner = x(beta0 + k) - 1.0;
            if (mu_g[k] >= 0) corner -= x(mu_g[k]) * static_cast<double>(m);
            if (mu_h[k] >= 0) corner -= x(mu_h[k]);
            hmat(0, 0) = corner;
            hmat.block(1, 0, km1, 1) = th;
            hmat.block(0, 1, 1, km1) = th.adjoint();
            hmat.block(1, 1, km1, km1) = MatC::Identity(km1, km1);
            return hmat;
        });

        prog.add_var_ge(alpha0 + k, 0.0);
        for (int idx : {varpi_g[k], mu_g[k], varpi_h[k], mu_h[k]})
            if (idx >= 0) prog.add_var_ge(idx, 0.0);
    }

    // |e_m|^2 <= 1 + b_{M+m} and b >= 0
    for (int i = 0; i < m; ++i) {
        MatR soc = MatR::Zero(4, nv);
        VecR off(4);
        soc(0, b0 + m + i) = 1.0;
        off(0) = 2.0;
        soc(1, e0_idx + 2 * i) = 2.0;
        soc(2, e0_idx + 2 * i + 1) = 2.0;
        off(1) = off(2) = 0.0;
        soc(3, b0 + m + i) = 1.0;
        off(3) = 0.0;
        prog.add_soc(soc, off);
    }
    for (int i = 0; i < 2 * m; ++i) prog.add_var_ge(b0 + i, 0.0);

    const std::size_t row_marker = prog.linear_row_marker();

    auto inner = [&](const VecC& e_t, double lambda) -> std::optional<CcpInnerResult> {
        prog.truncate_linear_rows(row_marker);
        for (int i = 0; i < m; ++i) {
            VecR a = VecR::Zero(nv);
            a(e0_idx + 2 * i) = 2.0 * std::real(e_t(i));
            a(e0_idx + 2 * i + 1) = 2.0 * std::imag(e_t(i));
            a(b0 + i) = 1.0;
            prog.add_linear_ge(a, 1.0 + std::norm(e_t(i)));
        }
        VecR c = VecR::Zero(nv);
        for (int k = 0; k < k_users; ++k) c(alpha0 + k) = -1.0;
        for (int i = 0; i < 2 * m; ++i) c(b0 + i) = lambda;
        prog.set_objective(c);

        auto sol = conic::solve(prog, solver_tol);
        if (sol.status != conic::SolveStatus::Optimal) return std::nullopt;
        CcpInnerResult res;
        res.e_next = cx_segment(sol.x, e0_idx, m);
        res.alphas = sol.x.segment(alpha0, k_users);
        res.b_norm1 = sol.x.segment(b0, 2 * m).cwiseMax(0.0).sum();
        return res;
    };

    const CcpResult ccp = penalty_ccp(e_lin, params, rng, inner);
    ReflectStepResult out;
    out.converged = ccp.converged;
    out.e = ccp.e;
    out.alphas = ccp.alphas;
    out.inner_iterations = ccp.iterations;
    out.restarts = ccp.restarts;
    return out;
}

/// Alternating optimization for the worst-case design (Problem (19) /
/// Problem (33)): random-phase initialization, nominal SOCP seed for the
/// first linearization point, precoder SDP and penalty-CCP reflect steps
/// until the power trace settles.
inline std::pair<BeamformingSolution, AoTrace> ao_bounded(Scenario scenario,
                                                          const EstimatedChannels& est,
                                                          const ErrorModel& model,
                                                          const QosSpec& qos,
                                                          std::uint64_t init_seed,
                                                          const PenaltyCcpParams& params = {},
                                                          const AoOptions& opts = {}) {
    const int m = static_cast<int>(est.cascaded_est[0].rows());
    Rng rng(Rng::key(0x40b5, init_seed, 0));
    BeamformingSolution best;
    AoTrace trace;

    for (int attempt = 0; attempt <= opts.init_restarts; ++attempt) {
        VecC e = rng.unit_phases(m);
        auto nominal = solve_precoder_nominal(est, e, qos, opts.solver_tol);
        if (nominal.status != conic::SolveStatus::Optimal) continue;
        MatC f = nominal.precoder;

        bool first_step_ok = false;
        for (int it = 0; it < opts.max_outer; ++it) {
            const double t0 = detail::now_ms();
            auto pre = solve_precoder_bounded(scenario, f, e, est, model, qos, opts.solver_tol);
            AoTraceRow row;
            row.iteration = it;
            row.stage = "precoder";
            row.status = pre.status;
            row.wall_ms = detail::now_ms() - t0;
            if (pre.status != conic::SolveStatus::Optimal) {
                trace.rows.push_back(row);
                break;  // infeasible or failed at this attempt
            }
            first_step_ok = true;
            f = pre.precoder;
            row.power_mw = pre.power_mw;
            trace.rows.push_back(row);
            trace.power_trace.push_back(pre.power_mw);

            best.precoder = f;
            best.reflect = e;
            best.power_mw = pre.power_mw;
            best.beta = pre.beta;
            best.feasible = true;
            best.outer_iterations = it + 1;

            const std::size_t np = trace.power_trace.size();
            if (np >= 2) {
                const double p0 = trace.power_trace[np - 2], p1 = trace.power_trace[np - 1];
                if (std::abs(p1 - p0) < opts.rel_tol * std::max(p0, 1e-300)) {
                    trace.converged = true;
                    return {best, trace};
                }
            }

            const double t1 = detail::now_ms();
            auto refl = solve_reflect_bounded(scenario, f, f, e, est, model, qos, params, rng,
                                              opts.solver_tol);
            AoTraceRow row2;
            row2.iteration = it;
            row2.stage = "reflect";
            row2.status = refl.converged ? conic::SolveStatus::Optimal
                                         : conic::SolveStatus::IterationLimit;
            row2.power_mw = best.power_mw;
            row2.wall_ms = detail::now_ms() - t1;
            trace.rows.push_back(row2);
            if (refl.converged) e = refl.e;  // otherwise keep the previous accepted e
        }
        if (first_step_ok) return {best, trace};  // ran out of outer iterations
        // initial precoder step infeasible: retry from a fresh random phase
        trace.power_trace.clear();
    }
    best.feasible = false;
    return {best, trace};
}

}  // namespace irsrobust

#endif
