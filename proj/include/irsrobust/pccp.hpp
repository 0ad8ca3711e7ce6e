#ifndef IRSROBUST_PCCP_HPP
#define IRSROBUST_PCCP_HPP

#include <functional>
#include <optional>

#include "irsrobust/common.hpp"
#include "irsrobust/rng.hpp"

namespace irsrobust {

/// Penalty convex-concave procedure schedule for the unit-modulus
/// constraints. The paper gives no numeric values; these follow standard
/// penalty-CCP practice.
struct PenaltyCcpParams {
    double lambda0 = 1.0;
    double gamma = 3.0;
    double lambda_max = 1e5;
    double chi = 1e-5;      // slack 1-norm threshold
    double nu = 1e-4;       // iterate-change threshold
    int t_max = 30;
    int restart_budget = 3;

    void validate() const {
        require(gamma > 1.0 && lambda_max >= lambda0 && lambda0 > 0.0 && chi > 0.0 && nu > 0.0,
                "PenaltyCcpParams: invalid schedule");
    }
};

struct CcpInnerResult {
    VecC e_next;
    VecR alphas;
    double b_norm1 = 0.0;
};

struct CcpResult {
    VecC e;
    VecR alphas;
    bool converged = false;
    int iterations = 0;
    int restarts = 0;
};

/// Shared driver for the reflect-vector subproblems: iterate the
/// convexified problem, escalate the penalty weight, restart from a fresh
/// random phase vector when the iteration cap is hit. `solve_inner` returns
/// nullopt on a recoverable solver failure, which also triggers a restart.
inline CcpResult penalty_ccp(
    const VecC& e0, const PenaltyCcpParams& params, Rng& restart_rng,
    const std::function<std::optional<CcpInnerResult>(const VecC&, double)>& solve_inner) {
    params.validate();
    CcpResult out;
    VecC e_t = e0;
    double lambda = params.lambda0;
    int t = 0;

    while (true) {
        if (t >= params.t_max) {
            if (out.restarts >= params.restart_budget) {
                out.e = e_t;
                out.converged = false;
                return out;
            }
            e_t = restart_rng.unit_phases(e0.size());
            lambda = params.lambda0;
            t = 0;
            ++out.restarts;
        }
        auto res = solve_inner(e_t, lambda);
        if (!res) {
            t = params.t_max;  // recoverable failure, force the restart branch
            continue;
        }
        const double de = norm1(res->e_next - e_t);
        e_t = res->e_next;
        out.alphas = res->alphas;
        lambda = std::min(params.gamma * lambda, params.lambda_max);
        ++t;
        ++out.iterations;
        if (res->b_norm1 <= params.chi && de <= params.nu) {
            // exact unit modulus on output
            for (Eigen::Index i = 0; i < e_t.size(); ++i) {
                const double mag = std::abs(e_t(i));
                e_t(i) = mag > 0 ? e_t(i) / mag : cxd(1.0, 0.0);
            }
            out.e = e_t;
            out.converged = true;
            return out;
        }
    }
}

}  // namespace irsrobust

#endif
