#pragma once

#include <cstddef>
#include <functional>
#include <new>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "../core/error.hpp"

namespace vmms::nn {

using Shape = std::vector<std::size_t>;

/// 64-byte aligned storage. Eigen's vector kernels peel differently depending
/// on the alignment of their operands, which would make results depend on
/// where the allocator happened to place a buffer.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept
    {
    }

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept
    {
        return true;
    }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

inline std::size_t shape_size(const Shape& s)
{
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s)
{
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < s.size(); ++i) out << (i ? "," : "") << s[i];
    out << ']';
    return out.str();
}

/// Dense row-major array of doubles. The leading dimension is the batch
/// wherever a tensor flows through a network.
struct Tensor {
    Shape shape;
    Storage data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(shape_size(shape), fill) {}
    Tensor(Shape s, const std::vector<double>& values) : shape(std::move(s)), data(values.begin(), values.end())
    {
        if (data.size() != shape_size(shape))
            throw logic_error("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                              shape_str(shape));
    }

    std::size_t size() const { return data.size(); }
    std::size_t batch() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t row_size() const { return shape.empty() || shape[0] == 0 ? 0 : data.size() / shape[0]; }
    Shape sample_shape() const { return shape.empty() ? Shape{} : Shape(shape.begin() + 1, shape.end()); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool operator==(const Tensor&) const = default;
};

} // namespace vmms::nn
