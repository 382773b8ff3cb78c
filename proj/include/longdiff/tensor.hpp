#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace longdiff {

// Minimal dense tensor, double precision, row-major. Feature maps use the
// shape (channels, depth, height, width); parameters use whatever rank fits.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
    std::string shape_str() const;

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }
};

// Named view over a parameter tensor and its gradient buffer. The referenced
// tensors are owned by the layers; order of collection is fixed, which makes
// checkpoints and optimizer state reproducible.
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
};

}  // namespace longdiff
