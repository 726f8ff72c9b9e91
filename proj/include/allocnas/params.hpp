#pragma once

#include "allocnas/autograd.hpp"

#include <map>
#include <string>
#include <vector>

namespace allocnas {

/// Named trainable tensors, iterated in lexicographic name order. Copying a
/// store deep-copies every parameter, so a copy never aliases the original.
class ParameterStore {
public:
    ParameterStore() = default;
    ParameterStore(const ParameterStore& other);
    ParameterStore& operator=(const ParameterStore& other);
    ParameterStore(ParameterStore&&) noexcept = default;
    ParameterStore& operator=(ParameterStore&&) noexcept = default;

    /// Registers a new parameter; the name must be unused.
    Var& add(const std::string& name, Tensor value);
    bool contains(const std::string& name) const { return params_.contains(name); }
    Var& at(const std::string& name);
    const Var& at(const std::string& name) const;
    void erase(const std::string& name) { params_.erase(name); }
    std::size_t size() const noexcept { return params_.size(); }
    std::size_t total_elements() const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    std::vector<std::string> names() const;

    /// Resets every gradient slot to zeros of the parameter's shape.
    void zero_grad();
    void set_requires_grad(bool flag);

    /// Bitwise digest of names, shapes and values (FNV-1a, 64 bit).
    std::uint64_t checksum() const;

private:
    std::map<std::string, Var> params_;
};

/// Zeroes every gradient in `params`, then runs the reverse sweep from the
/// scalar `loss`. Parameters that the loss does not reach keep zero grads.
void backward(const Var& loss, ParameterStore& params);

} // namespace allocnas
