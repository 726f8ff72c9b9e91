#pragma once

#include "allocnas/autograd.hpp"
#include "allocnas/rng.hpp"
#include "allocnas/transfer.hpp"
#include "reference_ops.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace allocnas::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    Tensor t(std::move(shape));
    for (auto& v : t.data())
        v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

/// Values bounded away from zero, for ops with a kink at the origin.
inline Tensor random_away_from_zero(Shape shape, Rng& rng, double margin = 0.05)
{
    Tensor t(std::move(shape));
    for (auto& v : t.data()) {
        const double m = rng.uniform(margin, 1.0);
        v = static_cast<float>(rng.uniform() < 0.5 ? -m : m);
    }
    return t;
}

struct GradCheck {
    double max_rel_error = 0.0;
    /// Largest |library forward - reference forward| over the outputs.
    double forward_error = 0.0;
    std::size_t checked = 0;
};

using RefFn = std::function<ref::D(const std::vector<ref::D>&)>;

/// Compares the analytic gradient of L = sum(r * f(inputs)) with central
/// differences (step h) of the same loss under the double-precision
/// reference forward `g`. The weights r are fixed random values. The
/// relative error of an element is |analytic - numeric| /
/// max(|analytic|, |numeric|, floor), where floor is 1e-2 times the largest
/// analytic magnitude of that input.
inline GradCheck check_gradients(const std::function<Var(const std::vector<Var>&)>& f, const RefFn& g,
                                 const std::vector<Tensor>& values, std::uint64_t seed, double h = 1e-3)
{
    Rng rng(seed);
    std::vector<Var> vars;
    for (const auto& v : values)
        vars.emplace_back(v, true);
    Var out = f(vars);
    Tensor r = random_tensor(out.shape(), rng);

    std::vector<ref::D> probe;
    for (const auto& v : values)
        probe.emplace_back(v);
    auto loss_at = [&](const std::vector<ref::D>& xs) {
        const ref::D y = g(xs);
        double s = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i)
            s += static_cast<double>(r[i]) * y.v[i];
        return s;
    };

    GradCheck result;
    const ref::D expected = g(probe);
    for (std::size_t i = 0; i < expected.v.size(); ++i)
        result.forward_error = std::max(result.forward_error, std::fabs(expected.v[i] - out.value()[i]));

    backward(out, r);
    for (std::size_t k = 0; k < values.size(); ++k) {
        const Tensor analytic = vars[k].grad().empty() ? Tensor::zeros_like(values[k]) : vars[k].grad();
        double scale = 0.0;
        for (float a : analytic.data())
            scale = std::max(scale, static_cast<double>(std::fabs(a)));
        const double floor = std::max(1e-2 * scale, 1e-6);
        for (std::size_t i = 0; i < values[k].numel(); ++i) {
            const double orig = probe[k].v[i];
            probe[k].v[i] = orig + h;
            const double up = loss_at(probe);
            probe[k].v[i] = orig - h;
            const double down = loss_at(probe);
            probe[k].v[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[i];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), floor});
            result.max_rel_error = std::max(result.max_rel_error, std::fabs(a - numeric) / denom);
            ++result.checked;
        }
    }
    return result;
}

inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::path(ALLOCNAS_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// A transfer setup small enough to run end to end in a few seconds.
inline TransferConfig tiny_transfer_config(std::uint64_t seed = 1)
{
    TransferConfig c;
    c.source.image_extent = 16;
    c.source.shapes = 2;
    c.source.bands = 2;
    c.source.n_classes = 4;
    c.source.n_samples = 240;
    c.target = c.source;
    c.target.n_samples = 24;
    c.target.texture_frequency = 2.0;
    c.source_val_fraction = 0.25;
    c.target_val_fraction = 0.5;
    c.super_alloc = Allocation({2, 2, 2, 2});
    c.kind = BlockKind{BlockFamily::BottleneckResidual, 4, 4.0};
    c.budget = 5;
    TrainSchedule s;
    s.epochs = 1;
    s.batch_size = 16;
    s.base_lr = 0.02;
    c.supernet_source = c.supernet_target = c.child_source = c.child_target = s;
    c.random_allocations = 2;
    c.seed = seed;
    return c;
}

} // namespace allocnas::testing
