#ifndef IRSROBUST_CONIC_PROGRAM_HPP
#define IRSROBUST_CONIC_PROGRAM_HPP

#include <functional>
#include <ostream>
#include <utility>
#include <vector>

#include "irsrobust/common.hpp"

namespace irsrobust::conic {

enum class RowSense { Eq, Ge };

enum class SolveStatus { Optimal, Infeasible, NumericalFailure, IterationLimit };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::NumericalFailure: return "numerical_failure";
        case SolveStatus::IterationLimit: return "iteration_limit";
    }
    return "unknown";
}

struct ConicSolution {
    SolveStatus status = SolveStatus::NumericalFailure;
    VecR x;
    double objective_value = 0.0;
    VecR dual;  // cone multipliers in block order (linear, soc, psd), svec layout for psd
    int iterations = 0;
    double gap = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
};

/// Symmetric vectorization with sqrt(2)-scaled off-diagonals, column-major
/// lower triangle, so that dot(svec(A), svec(B)) = Tr(A*B).
inline Eigen::Index svec_dim(Eigen::Index m) { return m * (m + 1) / 2; }

inline VecR svec(const MatR& s) {
    const Eigen::Index m = s.rows();
    VecR v(svec_dim(m));
    const double rt2 = std::sqrt(2.0);
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
        v(idx++) = s(j, j);
        for (Eigen::Index i = j + 1; i < m; ++i) v(idx++) = rt2 * s(i, j);
    }
    return v;
}

inline MatR smat(const VecR& v, Eigen::Index m) {
    MatR s(m, m);
    const double irt2 = 1.0 / std::sqrt(2.0);
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
        s(j, j) = v(idx++);
        for (Eigen::Index i = j + 1; i < m; ++i) {
            s(i, j) = irt2 * v(idx);
            s(j, i) = s(i, j);
            ++idx;
        }
    }
    return s;
}

/// Real embedding of a Hermitian matrix: [[Re H, -Im H], [Im H, Re H]].
/// PSD iff H is PSD; every eigenvalue of H appears twice.
inline MatR embed_hermitian(const MatC& h, double herm_tol = 1e-9) {
    const Eigen::Index n = h.rows();
    require(h.cols() == n, "embed_hermitian: matrix must be square");
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    require((h - h.adjoint()).cwiseAbs().maxCoeff() <= herm_tol * scale,
            "embed_hermitian: matrix is not Hermitian");
    MatR out(2 * n, 2 * n);
    const MatR re = h.real();
    const MatR im = h.imag();
    out.topLeftCorner(n, n) = re;
    out.topRightCorner(n, n) = -im;
    out.bottomLeftCorner(n, n) = im;
    out.bottomRightCorner(n, n) = re;
    // symmetrize away roundoff from the Hermitian check tolerance
    out = 0.5 * (out + out.transpose()).eval();
    return out;
}

struct LinearRow {
    VecR coeffs;
    double rhs = 0.0;
    RowSense sense = RowSense::Ge;
};

/// (coeffs * x + offset) must lie in the second-order cone
/// { (t, u) : ||u||_2 <= t }.
struct SocBlock {
    MatR coeffs;
    VecR offset;
};

/// S(x) = smat(constant) + sum_i x_i smat(map.col(i)) must be PSD.
struct PsdBlock {
    Eigen::Index dim = 0;
    MatR map;      // svec_dim x n_vars
    VecR constant; // svec_dim
};

/// Real conic program: minimize objective . x subject to linear rows,
/// second-order-cone blocks and PSD blocks. Construction is single-owner;
/// solving does not mutate the program.
class ConicProgram {
  public:
    explicit ConicProgram(int n_vars) : n_vars_(n_vars), objective_(VecR::Zero(n_vars)) {
        require(n_vars >= 1, "ConicProgram: need at least one variable");
    }

    int n_vars() const { return n_vars_; }

    void set_objective(const VecR& c) {
        require(c.size() == n_vars_, "set_objective: size mismatch");
        objective_ = c;
    }
    const VecR& objective() const { return objective_; }

    void add_linear(const VecR& a, RowSense sense, double rhs) {
        require(a.size() == n_vars_, "add_linear: size mismatch");
        linear_rows_.push_back({a, rhs, sense});
    }

    /// a . x >= rhs
    void add_linear_ge(const VecR& a, double rhs) { add_linear(a, RowSense::Ge, rhs); }
    /// x[i] >= rhs
    void add_var_ge(int i, double rhs) {
        VecR a = VecR::Zero(n_vars_);
        a(i) = 1.0;
        add_linear_ge(a, rhs);
    }

    void add_soc(const MatR& coeffs, const VecR& offset) {
        require(coeffs.cols() == n_vars_ && coeffs.rows() == offset.size() && coeffs.rows() >= 1,
                "add_soc: dimension mismatch");
        soc_blocks_.push_back({coeffs, offset});
    }

    /// Adds expr(x) >= 0 for an affine scalar map probed at the unit vectors.
    void add_linear_ge_from_map(const std::function<double(const VecR&)>& expr) {
        const double c0 = expr(VecR::Zero(n_vars_));
        VecR a(n_vars_);
        VecR probe = VecR::Zero(n_vars_);
        for (int i = 0; i < n_vars_; ++i) {
            probe(i) = 1.0;
            a(i) = expr(probe) - c0;
            probe(i) = 0.0;
        }
        add_linear_ge(a, -c0);
    }

    /// Adds (v(x)) in SOC for an affine map probed at the unit vectors.
    void add_soc_from_map(Eigen::Index dim, const std::function<VecR(const VecR&)>& vmap) {
        const VecR v0 = vmap(VecR::Zero(n_vars_));
        require(v0.size() == dim, "add_soc_from_map: wrong dimension");
        MatR coeffs(dim, n_vars_);
        VecR probe = VecR::Zero(n_vars_);
        for (int i = 0; i < n_vars_; ++i) {
            probe(i) = 1.0;
            coeffs.col(i) = vmap(probe) - v0;
            probe(i) = 0.0;
        }
        add_soc(coeffs, v0);
    }

    void add_psd(PsdBlock block) {
        require(block.map.rows() == svec_dim(block.dim) && block.map.cols() == n_vars_ &&
                    block.constant.size() == svec_dim(block.dim),
                "add_psd: dimension mismatch");
        psd_blocks_.push_back(std::move(block));
    }

    /// Adds S(x) >= 0 by probing an affine symmetric-matrix-valued map at
    /// the unit vectors. The map must be exactly affine.
    void add_psd_from_map(Eigen::Index dim, const std::function<MatR(const VecR&)>& smap) {
        PsdBlock b;
        b.dim = dim;
        const MatR s0 = smap(VecR::Zero(n_vars_));
        require(s0.rows() == dim && s0.cols() == dim, "add_psd_from_map: wrong dimension");
        b.constant = svec(0.5 * (s0 + s0.transpose()));
        b.map.resize(svec_dim(dim), n_vars_);
        VecR probe = VecR::Zero(n_vars_);
        for (int i = 0; i < n_vars_; ++i) {
            probe(i) = 1.0;
            const MatR si = smap(probe) - s0;
            b.map.col(i) = svec(0.5 * (si + si.transpose()));
            probe(i) = 0.0;
        }
        add_psd(std::move(b));
    }

    /// Adds H(x) >= 0 for an affine complex Hermitian map, through the real
    /// embedding [[Re, -Im], [Im, Re]]. Throws if the map is not Hermitian.
    void add_psd_from_hermitian_map(Eigen::Index dim, const std::function<MatC(const VecR&)>& hmap) {
        PsdBlock b;
        b.dim = 2 * dim;
        const MatC h0 = hmap(VecR::Zero(n_vars_));
        require(h0.rows() == dim && h0.cols() == dim, "add_psd_from_hermitian_map: wrong dimension");
        b.constant = svec(embed_hermitian(h0));
        b.map.resize(svec_dim(2 * dim), n_vars_);
        VecR probe = VecR::Zero(n_vars_);
        for (int i = 0; i < n_vars_; ++i) {
            probe(i) = 1.0;
            b.map.col(i) = svec(embed_hermitian(hmap(probe) - h0));
            probe(i) = 0.0;
        }
        add_psd(std::move(b));
    }

    /// Schur-complement norm constraint ||vec(x)||^2 <= scalar(x) as the
    /// PSD block [[scalar, v^H], [v, I]], pre-embedded to real form.
    void add_schur_norm_lmi(const std::function<double(const VecR&)>& scalar,
                            const std::function<VecC(const VecR&)>& vector, Eigen::Index len) {
        add_psd_from_hermitian_map(len + 1, [&](const VecR& x) {
            MatC h = MatC::Zero(len + 1, len + 1);
            h(0, 0) = scalar(x);
            const VecC v = vector(x);
            require(v.size() == len, "add_schur_norm_lmi: vector length mismatch");
            h.block(1, 0, len, 1) = v;
            h.block(0, 1, 1, len) = v.adjoint();
            h.block(1, 1, len, len) = MatC::Identity(len, len);
            return h;
        });
    }

    const std::vector<LinearRow>& linear_rows() const { return linear_rows_; }
    const std::vector<SocBlock>& soc_blocks() const { return soc_blocks_; }
    const std::vector<PsdBlock>& psd_blocks() const { return psd_blocks_; }

    /// Marker-based truncation so iterative schemes can re-stamp the rows
    /// that change between passes while keeping the expensive blocks.
    std::size_t linear_row_marker() const { return linear_rows_.size(); }
    std::size_t soc_block_marker() const { return soc_blocks_.size(); }
    void truncate_linear_rows(std::size_t marker) { linear_rows_.resize(marker); }
    void truncate_soc_blocks(std::size_t marker) { soc_blocks_.resize(marker); }

    /// Worst primal violation of every constraint block at x
    /// (nonnegative linear slack, SOC margin, smallest PSD eigenvalue).
    double max_violation(const VecR& x) const {
        double viol = 0.0;
        for (const auto& row : linear_rows_) {
            const double r = row.coeffs.dot(x) - row.rhs;
            viol = std::max(viol, row.sense == RowSense::Eq ? std::abs(r) : -r);
        }
        for (const auto& soc : soc_blocks_) {
            const VecR v = soc.coeffs * x + soc.offset;
            viol = std::max(viol, v.tail(v.size() - 1).norm() - v(0));
        }
        for (const auto& psd : psd_blocks_) {
            const MatR s = smat(psd.constant + psd.map * x, psd.dim);
            Eigen::SelfAdjointEigenSolver<MatR> es(s, Eigen::EigenvaluesOnly);
            viol = std::max(viol, -es.eigenvalues().minCoeff());
        }
        return viol;
    }

    /// Sparse-triplet text dump for cross-solver diffing. One line per
    /// nonzero; PSD maps are emitted in svec coordinates.
    void dump_triplets(std::ostream& os, double drop_tol = 0.0) const {
        os.precision(17);
        os << "conicprogram 1\n";
        os << "vars " << n_vars_ << "\n";
        os << "objective\n";
        for (int i = 0; i < n_vars_; ++i)
            if (std::abs(objective_(i)) > drop_tol) os << i << " " << objective_(i) << "\n";
        os << "linear " << linear_rows_.size() << "\n";
        for (std::size_t r = 0; r < linear_rows_.size(); ++r) {
            const auto& row = linear_rows_[r];
            os << "row " << r << " " << (row.sense == RowSense::Eq ? "eq" : "ge") << " " << row.rhs << "\n";
            for (int i = 0; i < n_vars_; ++i)
                if (std::abs(row.coeffs(i)) > drop_tol) os << i << " " << row.coeffs(i) << "\n";
        }
        os << "soc " << soc_blocks_.size() << "\n";
        for (std::size_t b = 0; b < soc_blocks_.size(); ++b) {
            const auto& soc = soc_blocks_[b];
            os << "block " << b << " dim " << soc.coeffs.rows() << "\n";
            for (Eigen::Index i = 0; i < soc.coeffs.rows(); ++i) {
                if (std::abs(soc.offset(i)) > drop_tol) os << i << " -1 " << soc.offset(i) << "\n";
                for (int j = 0; j < n_vars_; ++j)
                    if (std::abs(soc.coeffs(i, j)) > drop_tol) os << i << " " << j << " " << soc.coeffs(i, j) << "\n";
            }
        }
        os << "psd " << psd_blocks_.size() << "\n";
        for (std::size_t b = 0; b < psd_blocks_.size(); ++b) {
            const auto& psd = psd_blocks_[b];
            os << "block " << b << " dim " << psd.dim << "\n";
            for (Eigen::Index i = 0; i < psd.constant.size(); ++i) {
                if (std::abs(psd.constant(i)) > drop_tol) os << i << " -1 " << psd.constant(i) << "\n";
                for (int j = 0; j < n_vars_; ++j)
                    if (std::abs(psd.map(i, j)) > drop_tol) os << i << " " << j << " " << psd.map(i, j) << "\n";
            }
        }
    }

  private:
    int n_vars_;
    VecR objective_;
    std::vector<LinearRow> linear_rows_;
    std::vector<SocBlock> soc_blocks_;
    std::vector<PsdBlock> psd_blocks_;
};

}  // namespace irsrobust::conic

#endif
