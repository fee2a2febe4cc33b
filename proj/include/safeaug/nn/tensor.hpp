#pragma once

#include <cstddef>
#include <cstdlib>
#include <new>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace safeaug::nn {

/// 64-byte-aligned allocator. Keeping every tensor buffer at the same
/// alignment makes vectorized kernels split their loops identically on
/// every allocation, so repeated runs are bit-for-bit reproducible.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t kAlign = 64;

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) {
        void* p = std::aligned_alloc(kAlign, ((n * sizeof(T) + kAlign - 1) / kAlign) * kAlign);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { std::free(p); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const {
        return true;
    }
};

using AlignedVector = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major tensor of doubles. 4-d tensors are (N, C, H, W), 2-d are
/// (N, F). Double precision keeps the analytic/finite-difference gradient
/// comparison far away from the tolerance floor.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, double fill = 0.0) : shape_(std::move(shape)) {
        data_.assign(count(shape_), fill);
    }

    static std::size_t count(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(i); }
    int ndim() const { return static_cast<int>(shape_.size()); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    AlignedVector& vec() { return data_; }
    const AlignedVector& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// (N, C, H, W) accessor.
    double& at4(int n, int c, int y, int x) {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    double at4(int n, int c, int y, int x) const {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }

    /// (N, F) accessor.
    double& at2(int n, int f) { return data_[static_cast<std::size_t>(n) * shape_[1] + f]; }
    double at2(int n, int f) const { return data_[static_cast<std::size_t>(n) * shape_[1] + f]; }

    void zero() { std::fill(data_.begin(), data_.end(), 0.0); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    std::vector<int> shape_;
    AlignedVector data_;
};

}  // namespace safeaug::nn
