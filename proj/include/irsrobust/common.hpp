#ifndef IRSROBUST_COMMON_HPP
#define IRSROBUST_COMMON_HPP

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace irsrobust {

using cxd = std::complex<double>;
using VecC = Eigen::VectorXcd;
using MatC = Eigen::MatrixXcd;
using VecR = Eigen::VectorXd;
using MatR = Eigen::MatrixXd;

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

/// vec(X): column-major stacking, matches Eigen's internal layout.
inline VecC vec(const MatC& x) {
    return Eigen::Map<const VecC>(x.data(), x.size());
}

inline MatC unvec(const VecC& v, Eigen::Index rows, Eigen::Index cols) {
    require(v.size() == rows * cols, "unvec: size mismatch");
    return Eigen::Map<const MatC>(v.data(), rows, cols);
}

inline MatC kron(const MatC& a, const MatC& b) {
    MatC out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Complex vector 1-norm (sum of moduli).
inline double norm1(const VecC& v) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += std::abs(v(i));
    return s;
}

}  // namespace irsrobust

#endif
