#include "allocnas/tensor.hpp"

#include "allocnas/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace allocnas {

std::size_t shape_numel(const Shape& shape)
{
    std::size_t n = 1;
    for (auto extent : shape)
        n *= extent;
    return n;
}

std::string shape_to_string(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape))
{
    for (auto extent : shape_)
        if (extent == 0)
            throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape_));
    data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(data.begin(), data.end())
{
    for (auto extent : shape_)
        if (extent == 0)
            throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape_));
    if (shape_numel(shape_) != data_.size())
        throw DimensionError("shape " + shape_to_string(shape_) + " does not match " + std::to_string(data_.size()) + " values");
}

Tensor Tensor::uninitialized(Shape shape)
{
    Tensor t;
    for (auto extent : shape)
        if (extent == 0)
            throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
    t.data_.resize(shape_numel(shape));
    t.shape_ = std::move(shape);
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const
{
    if (axis >= shape_.size())
        throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(shape_));
    return shape_[axis];
}

float& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w)
{
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

float Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const
{
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const
{
    if (shape_numel(shape) != data_.size())
        throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
}

bool Tensor::all_finite() const noexcept
{
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

double Tensor::sum() const noexcept
{
    double acc = 0.0;
    for (float v : data_)
        acc += v;
    return acc;
}

double max_abs_diff(const Tensor& a, const Tensor& b)
{
    if (a.shape() != b.shape())
        throw DimensionError("max_abs_diff: " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

} // namespace allocnas
