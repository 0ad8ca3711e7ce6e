#ifndef IRSROBUST_SOLUTION_HPP
#define IRSROBUST_SOLUTION_HPP

#include <string>
#include <vector>

#include "irsrobust/common.hpp"
#include "irsrobust/conic/program.hpp"

namespace irsrobust {

enum class Scenario { PCU, FCU };

inline const char* to_string(Scenario s) { return s == Scenario::PCU ? "pcu" : "fcu"; }

struct BeamformingSolution {
    MatC precoder;      // F, N x K
    VecC reflect;       // e, unit modulus
    double power_mw = 0.0;
    VecR beta;          // per-user IN-power slacks, linear mW
    bool feasible = false;
    int outer_iterations = 0;
};

struct AoTraceRow {
    int iteration = 0;
    std::string stage;  // "precoder" or "reflect"
    conic::SolveStatus status = conic::SolveStatus::NumericalFailure;
    double power_mw = 0.0;
    double wall_ms = 0.0;
    double rank_ratio = 0.0;  // max_k lambda2/lambda1 of Gamma_k (SDR path only)
};

struct AoTrace {
    std::vector<AoTraceRow> rows;
    std::vector<double> power_trace;  // power after each accepted precoder step
    bool converged = false;
};

struct AoOptions {
    double rel_tol = 1e-4;      // convergence tolerance on the power trace
    int max_outer = 30;
    double solver_tol = 1e-8;
    int init_restarts = 3;      // fresh random e(0) draws before declaring infeasible
};

}  // namespace irsrobust

#endif
