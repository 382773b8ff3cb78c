#include "longdiff/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace longdiff {

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dims must be positive");
        n *= d;
    }
    data.assign(static_cast<std::size_t>(n), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

}  // namespace longdiff
