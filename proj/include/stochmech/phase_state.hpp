#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "stochmech/errors.hpp"

namespace stochmech {

/// Minimal dense square matrix, row-major. Dimensions here are the number of
/// degrees of freedom (a handful), so nothing clever is needed.
class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

    static SquareMatrix identity(std::size_t n) {
        SquareMatrix m(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t size() const { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    const std::vector<double>& data() const { return data_; }

    bool symmetric(double rel_tol) const {
        double scale = 0.0;
        for (double v : data_) scale = std::max(scale, std::abs(v));
        if (scale == 0.0) return true;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j)
                if (std::abs((*this)(i, j) - (*this)(j, i)) > rel_tol * scale) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

/// A point (x, p, t) in phase space.
struct PhaseState {
    std::vector<double> x;
    std::vector<double> p;
    double t = 0.0;

    PhaseState() = default;
    PhaseState(std::vector<double> x_, std::vector<double> p_, double t_ = 0.0)
        : x(std::move(x_)), p(std::move(p_)), t(t_) {}

    /// Convenience for one degree of freedom.
    PhaseState(double x0, double p0, double t0 = 0.0) : x{x0}, p{p0}, t(t0) {}

    std::size_t dof() const { return x.size(); }

    bool finite() const {
        for (double v : x)
            if (!std::isfinite(v)) return false;
        for (double v : p)
            if (!std::isfinite(v)) return false;
        return std::isfinite(t);
    }

    bool well_formed() const { return !x.empty() && x.size() == p.size() && finite(); }
};

/// Raw second derivatives of H at a state. Signs are applied downstream when
/// the variational matrix is assembled.
struct HessianBlocks {
    SquareMatrix Axx; ///< d2H/dx_i dx_j
    SquareMatrix Bpp; ///< d2H/dp_i dp_j
    SquareMatrix Cxp; ///< d2H/dx_i dp_j (zero for every separable model)

    std::size_t dof() const { return Axx.size(); }

    bool separable(double abs_tol = 1e-12) const {
        const double scale = std::max({Axx.max_abs(), Bpp.max_abs(), 1.0});
        return Cxp.max_abs() <= abs_tol * scale;
    }
};

} // namespace stochmech
