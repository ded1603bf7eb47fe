#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace fimcb {

/// Dense row-major tensor of doubles.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)),
          values_(std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                  std::multiplies<>{}),
                  fill) {
        if (shape_.empty()) {
            throw std::invalid_argument("Tensor: shape must have at least one extent");
        }
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t numel() const { return values_.size(); }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    void fill(double v) { values_.assign(values_.size(), v); }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

} // namespace fimcb
