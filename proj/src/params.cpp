#include "allocnas/params.hpp"

#include "allocnas/errors.hpp"

#include <cstring>

namespace allocnas {

ParameterStore::ParameterStore(const ParameterStore& other)
{
    for (const auto& [name, var] : other.params_)
        params_.emplace(name, var.detached_copy());
}

ParameterStore& ParameterStore::operator=(const ParameterStore& other)
{
    if (this != &other) {
        ParameterStore copy(other);
        *this = std::move(copy);
    }
    return *this;
}

Var& ParameterStore::add(const std::string& name, Tensor value)
{
    if (params_.contains(name))
        throw ContractError("parameter '" + name + "' already registered");
    Var v(std::move(value), true);
    v.grad_slot();
    return params_.emplace(name, std::move(v)).first->second;
}

Var& ParameterStore::at(const std::string& name)
{
    auto it = params_.find(name);
    if (it == params_.end())
        throw ContractError("unknown parameter '" + name + "'");
    return it->second;
}

const Var& ParameterStore::at(const std::string& name) const
{
    auto it = params_.find(name);
    if (it == params_.end())
        throw ContractError("unknown parameter '" + name + "'");
    return it->second;
}

std::size_t ParameterStore::total_elements() const
{
    std::size_t n = 0;
    for (const auto& [name, var] : params_)
        n += var.value().numel();
    return n;
}

std::vector<std::string> ParameterStore::names() const
{
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, var] : params_)
        out.push_back(name);
    return out;
}

void ParameterStore::zero_grad()
{
    for (auto& [name, var] : params_)
        var.grad_slot().fill(0.0f);
}

void ParameterStore::set_requires_grad(bool flag)
{
    for (auto& [name, var] : params_)
        var.node()->requires_grad = flag;
}

std::uint64_t ParameterStore::checksum() const
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [name, var] : params_) {
        feed(name.data(), name.size());
        for (auto extent : var.shape()) {
            const auto e = static_cast<std::uint64_t>(extent);
            feed(&e, sizeof e);
        }
        feed(var.value().ptr(), var.value().numel() * sizeof(float));
    }
    return h;
}

void backward(const Var& loss, ParameterStore& params)
{
    params.zero_grad();
    backward(loss);
}

} // namespace allocnas
