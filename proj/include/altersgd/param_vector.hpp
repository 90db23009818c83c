#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace altersgd {

/// Flat dense vector holding every trainable parameter of a model.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
    explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
    ParamVector(std::initializer_list<double> values) : values_(values) {}

    [[nodiscard]] std::size_t dim() const noexcept { return values_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

    double &operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    [[nodiscard]] std::span<double> span() noexcept { return values_; }
    [[nodiscard]] std::span<const double> span() const noexcept { return values_; }
    [[nodiscard]] const std::vector<double> &values() const noexcept { return values_; }

    auto begin() noexcept { return values_.begin(); }
    auto end() noexcept { return values_.end(); }
    auto begin() const noexcept { return values_.begin(); }
    auto end() const noexcept { return values_.end(); }

    [[nodiscard]] bool all_finite() const noexcept {
        for (double v : values_) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

    bool operator==(const ParamVector &) const = default;

private:
    std::vector<double> values_;
};

[[nodiscard]] inline double dot(const ParamVector &a, const ParamVector &b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

[[nodiscard]] inline double norm(const ParamVector &a) { return std::sqrt(dot(a, a)); }

/// y <- y + alpha * x
inline void axpy(double alpha, const ParamVector &x, ParamVector &y) {
    for (std::size_t i = 0; i < x.dim(); ++i) {
        y[i] += alpha * x[i];
    }
}

[[nodiscard]] inline ParamVector scaled(const ParamVector &x, double alpha) {
    ParamVector out = x;
    for (double &v : out) {
        v *= alpha;
    }
    return out;
}

[[nodiscard]] inline ParamVector operator+(const ParamVector &a, const ParamVector &b) {
    ParamVector out = a;
    axpy(1.0, b, out);
    return out;
}

[[nodiscard]] inline ParamVector operator-(const ParamVector &a, const ParamVector &b) {
    ParamVector out = a;
    axpy(-1.0, b, out);
    return out;
}

}  // namespace altersgd
