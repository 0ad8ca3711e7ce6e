#ifndef IRSROBUST_RNG_HPP
#define IRSROBUST_RNG_HPP

#include <cmath>
#include <cstdint>

#include "irsrobust/common.hpp"

namespace irsrobust {

/// Deterministic counter-based generator. Streams are keyed by
/// (experiment id, instance id, draw id) so any single sample can be
/// reproduced in isolation, independent of platform or libstdc++
/// distribution internals.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // splitmix64 warmup decorrelates small seeds
        next_u64();
        next_u64();
    }

    static std::uint64_t key(std::uint64_t experiment, std::uint64_t instance,
                             std::uint64_t draw) {
        std::uint64_t k = mix(experiment + 0x9e3779b97f4a7c15ULL);
        k = mix(k ^ mix(instance + 0xbf58476d1ce4e5b9ULL));
        k = mix(k ^ mix(draw + 0x94d049bb133111ebULL));
        return k;
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard real normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * M_PI * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

    /// CN(0, 1): unit-variance circularly symmetric complex Gaussian.
    cxd cnormal() {
        const double s = M_SQRT1_2;
        return {s * normal(), s * normal()};
    }

    VecC cnormal_vector(Eigen::Index n) {
        VecC v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = cnormal();
        return v;
    }

    MatC cnormal_matrix(Eigen::Index rows, Eigen::Index cols) {
        MatC m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = cnormal();
        return m;
    }

    /// Vector of unit-modulus entries with i.i.d. uniform phases.
    VecC unit_phases(Eigen::Index n) {
        VecC v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double th = 2.0 * M_PI * uniform();
            v(i) = cxd(std::cos(th), std::sin(th));
        }
        return v;
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace irsrobust

#endif
