#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace filterlab {

/// Dense polynomial in one variable, coefficients in ascending powers.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<double> coefficients) : c_(std::move(coefficients)) { trim(); }

    static Polynomial monomial(int degree, double scale = 1.0)
    {
        std::vector<double> c(static_cast<std::size_t>(degree) + 1, 0.0);
        c.back() = scale;
        return Polynomial(std::move(c));
    }

    const std::vector<double>& coefficients() const noexcept { return c_; }
    int degree() const noexcept { return c_.empty() ? -1 : static_cast<int>(c_.size()) - 1; }
    bool is_zero() const noexcept { return c_.empty(); }

    double coefficient(int k) const noexcept
    {
        return k >= 0 && k < static_cast<int>(c_.size()) ? c_[static_cast<std::size_t>(k)] : 0.0;
    }

    double operator()(double x) const noexcept
    {
        double v = 0.0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) v = v * x + *it;
        return v;
    }

    Polynomial derivative() const
    {
        if (c_.size() <= 1) return {};
        std::vector<double> d(c_.size() - 1);
        for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = static_cast<double>(k) * c_[k];
        return Polynomial(std::move(d));
    }

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b)
    {
        std::vector<double> c(std::max(a.c_.size(), b.c_.size()), 0.0);
        for (std::size_t k = 0; k < a.c_.size(); ++k) c[k] += a.c_[k];
        for (std::size_t k = 0; k < b.c_.size(); ++k) c[k] += b.c_[k];
        return Polynomial(std::move(c));
    }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b)
    {
        if (a.is_zero() || b.is_zero()) return {};
        std::vector<double> c(a.c_.size() + b.c_.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.c_.size(); ++i)
            for (std::size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
        return Polynomial(std::move(c));
    }

    friend Polynomial operator*(double s, const Polynomial& p)
    {
        std::vector<double> c = p.c_;
        for (double& v : c) v *= s;
        return Polynomial(std::move(c));
    }

private:
    void trim()
    {
        while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
    }

    std::vector<double> c_;
};

/**
 * Piecewise polynomial on breakpoints x_0 < ... < x_p. Piece i covers
 * [x_i, x_{i+1}); the first and last pieces extend to -inf and +inf.
 */
class PiecewisePolynomial {
public:
    PiecewisePolynomial() = default;

    PiecewisePolynomial(std::vector<double> breakpoints, std::vector<Polynomial> pieces)
        : breaks_(std::move(breakpoints)), pieces_(std::move(pieces))
    {
        if (pieces_.empty()) throw std::invalid_argument("piecewise polynomial needs a piece");
        if (breaks_.size() != pieces_.size() + 1 && !(pieces_.size() == 1 && breaks_.empty())) {
            throw std::invalid_argument("piecewise polynomial: need one more breakpoint than pieces");
        }
        if (!std::is_sorted(breaks_.begin(), breaks_.end()) ||
            std::adjacent_find(breaks_.begin(), breaks_.end()) != breaks_.end()) {
            throw std::invalid_argument("piecewise polynomial: breakpoints must increase strictly");
        }
    }

    explicit PiecewisePolynomial(Polynomial single) : pieces_{std::move(single)} {}

    std::size_t pieces() const noexcept { return pieces_.size(); }
    const Polynomial& piece(std::size_t i) const { return pieces_.at(i); }

    double operator()(double x, int derivative_order = 0) const
    {
        const Polynomial* p = &locate(x);
        if (derivative_order == 0) return (*p)(x);
        Polynomial d = *p;
        for (int k = 0; k < derivative_order; ++k) d = d.derivative();
        return d(x);
    }

private:
    const Polynomial& locate(double x) const
    {
        if (pieces_.size() == 1) return pieces_.front();
        const auto it = std::upper_bound(breaks_.begin() + 1, breaks_.end() - 1, x);
        return pieces_[static_cast<std::size_t>(it - (breaks_.begin() + 1))];
    }

    std::vector<double> breaks_;
    std::vector<Polynomial> pieces_;
};

}  // namespace filterlab
