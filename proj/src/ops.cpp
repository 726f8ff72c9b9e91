#include "allocnas/ops.hpp"

#include "allocnas/errors.hpp"
#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace allocnas {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what)
{
    if (t.rank() != rank)
        throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " + shape_to_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what)
{
    if (a.shape() != b.shape())
        throw DimensionError(std::string(what) + ": " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
}

struct ConvGeometry {
    std::size_t n, c, h, w;  // input
    std::size_t o, cg, k;    // kernel: o outputs, cg inputs per group, k x k
    std::size_t og, groups;  // outputs per group
    std::size_t ho, wo;
    std::size_t stride, pad;

    std::size_t col_rows() const { return cg * k * k; }
    std::size_t out_plane() const { return ho * wo; }
    bool direct() const { return k == 1 && stride == 1 && pad == 0; }
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& kernel, const Conv2dOptions& opts)
{
    require_rank(x, 4, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    if (opts.stride < 1)
        throw ContractError("conv2d: stride must be >= 1");
    if (opts.groups < 1)
        throw ContractError("conv2d: groups must be >= 1");
    ConvGeometry g{};
    g.n = x.dim(0);
    g.c = x.dim(1);
    g.h = x.dim(2);
    g.w = x.dim(3);
    g.o = kernel.dim(0);
    g.cg = kernel.dim(1);
    g.k = kernel.dim(2);
    g.groups = opts.groups;
    g.stride = opts.stride;
    g.pad = opts.pad;
    if (kernel.dim(3) != g.k)
        throw DimensionError("conv2d: kernel must be square, got " + shape_to_string(kernel.shape()));
    if (g.c % g.groups != 0 || g.o % g.groups != 0 || g.c / g.groups != g.cg)
        throw DimensionError("conv2d: channel mismatch, input " + shape_to_string(x.shape()) + " kernel " +
                             shape_to_string(kernel.shape()) + " groups " + std::to_string(g.groups));
    if (g.h + 2 * g.pad < g.k || g.w + 2 * g.pad < g.k)
        throw DimensionError("conv2d: kernel larger than padded input");
    g.og = g.o / g.groups;
    g.ho = (g.h + 2 * g.pad - g.k) / g.stride + 1;
    g.wo = (g.w + 2 * g.pad - g.k) / g.stride + 1;
    return g;
}

/// Unfold channels [c0, c0+cg) of the whole batch into
/// col[cg*k*k, n*ho*wo]; column n*plane + p is output pixel p of sample n.
void im2col(const ConvGeometry& g, const float* x, std::size_t c0, float* col)
{
    const auto plane = g.out_plane();
    const auto width = g.n * plane;
    for (std::size_t cl = 0; cl < g.cg; ++cl) {
        for (std::size_t kh = 0; kh < g.k; ++kh) {
            for (std::size_t kw = 0; kw < g.k; ++kw) {
                float* dst_row = col + ((cl * g.k + kh) * g.k + kw) * width;
                for (std::size_t s = 0; s < g.n; ++s) {
                    const float* src = x + (s * g.c + c0 + cl) * g.h * g.w;
                    float* dst = dst_row + s * plane;
                    for (std::size_t oh = 0; oh < g.ho; ++oh) {
                        const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) - static_cast<std::ptrdiff_t>(g.pad);
                        float* row = dst + oh * g.wo;
                        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) {
                            std::fill(row, row + g.wo, 0.0f);
                            continue;
                        }
                        const float* srow = src + ih * g.w;
                        if (g.stride == 1 && kw >= g.pad && g.wo + kw <= g.w + g.pad) {
                            std::copy(srow + (kw - g.pad), srow + (kw - g.pad) + g.wo, row);
                            continue;
                        }
                        for (std::size_t ow = 0; ow < g.wo; ++ow) {
                            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) - static_cast<std::ptrdiff_t>(g.pad);
                            row[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0f : srow[iw];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: fold-and-add col into channels [c0, c0+cg) of dx.
void col2im_add(const ConvGeometry& g, const float* col, std::size_t c0, float* dx)
{
    const auto plane = g.out_plane();
    const auto width = g.n * plane;
    for (std::size_t cl = 0; cl < g.cg; ++cl) {
        for (std::size_t kh = 0; kh < g.k; ++kh) {
            for (std::size_t kw = 0; kw < g.k; ++kw) {
                const float* src_row = col + ((cl * g.k + kh) * g.k + kw) * width;
                for (std::size_t s = 0; s < g.n; ++s) {
                    float* dst = dx + (s * g.c + c0 + cl) * g.h * g.w;
                    const float* src = src_row + s * plane;
                    for (std::size_t oh = 0; oh < g.ho; ++oh) {
                        const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) - static_cast<std::ptrdiff_t>(g.pad);
                        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h))
                            continue;
                        float* drow = dst + ih * g.w;
                        const float* srow = src + oh * g.wo;
                        for (std::size_t ow = 0; ow < g.wo; ++ow) {
                            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) - static_cast<std::ptrdiff_t>(g.pad);
                            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.w))
                                drow[iw] += srow[ow];
                        }
                    }
                }
            }
        }
    }
}

/// Rows [o0, o0+rows) of an NCHW tensor as a [rows, n*plane] matrix.
void gather_channels(const float* src, std::size_t n, std::size_t channels, std::size_t o0, std::size_t rows, std::size_t plane,
                     float* dst)
{
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t s = 0; s < n; ++s) {
            const float* from = src + (s * channels + o0 + r) * plane;
            std::copy(from, from + plane, dst + (r * n + s) * plane);
        }
}

void scatter_channels(const float* src, std::size_t n, std::size_t channels, std::size_t o0, std::size_t rows, std::size_t plane,
                      float* dst)
{
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t s = 0; s < n; ++s) {
            const float* from = src + (r * n + s) * plane;
            std::copy(from, from + plane, dst + (s * channels + o0 + r) * plane);
        }
}

} // namespace

Var conv2d(const Var& input, const Var& kernel, Conv2dOptions opts)
{
    const auto g = conv_geometry(input.value(), kernel.value(), opts);
    auto out = Tensor::uninitialized({g.n, g.o, g.ho, g.wo});
    const auto plane = g.out_plane();
    const auto width = g.n * plane;
    const auto rows = g.col_rows();
    std::vector<float> col(rows * width);
    std::vector<float> res(g.og * width);
    const float* x = input.value().ptr();
    const float* w = kernel.value().ptr();
    for (std::size_t grp = 0; grp < g.groups; ++grp) {
        if (g.direct())
            gather_channels(x, g.n, g.c, grp * g.cg, g.cg, plane, col.data());
        else
            im2col(g, x, grp * g.cg, col.data());
        std::fill(res.begin(), res.end(), 0.0f);
        kernels::gemm_nn(g.og, width, rows, w + grp * g.og * rows, col.data(), res.data());
        scatter_channels(res.data(), g.n, g.o, grp * g.og, g.og, plane, out.ptr());
    }

    return make_result(std::move(out), {input, kernel}, [g](Node& self) {
        Node& in = *self.inputs[0];
        Node& ker = *self.inputs[1];
        const auto plane = g.out_plane();
        const auto width = g.n * plane;
        const auto rows = g.col_rows();
        const float* x = in.value.ptr();
        const float* w = ker.value.ptr();
        float* dw = ker.requires_grad ? ker.grad_slot().ptr() : nullptr;
        float* dx = in.requires_grad ? in.grad_slot().ptr() : nullptr;
        std::vector<float> col(dw ? rows * width : 0);
        std::vector<float> dcol(dx ? rows * width : 0);
        std::vector<float> dy(g.og * width);
        for (std::size_t grp = 0; grp < g.groups; ++grp) {
            gather_channels(self.grad.ptr(), g.n, g.o, grp * g.og, g.og, plane, dy.data());
            if (dw) {
                if (g.direct())
                    gather_channels(x, g.n, g.c, grp * g.cg, g.cg, plane, col.data());
                else
                    im2col(g, x, grp * g.cg, col.data());
                kernels::gemm_nt(g.og, rows, width, dy.data(), col.data(), dw + grp * g.og * rows);
            }
            if (dx) {
                std::fill(dcol.begin(), dcol.end(), 0.0f);
                kernels::gemm_tn(rows, width, g.og, w + grp * g.og * rows, dy.data(), dcol.data());
                if (g.direct()) {
                    for (std::size_t r = 0; r < g.cg; ++r)
                        for (std::size_t s = 0; s < g.n; ++s) {
                            const float* from = dcol.data() + (r * g.n + s) * plane;
                            float* to = dx + (s * g.c + grp * g.cg + r) * plane;
                            for (std::size_t p = 0; p < plane; ++p)
                                to[p] += from[p];
                        }
                } else {
                    col2im_add(g, dcol.data(), grp * g.cg, dx);
                }
            }
        }
    });
}

Var group_norm(const Var& input, const Var& gamma, const Var& beta, GroupNormOptions opts)
{
    const Tensor& x = input.value();
    require_rank(x, 4, "group_norm input");
    const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    if (opts.groups < 1 || c % opts.groups != 0)
        throw DimensionError("group_norm: " + std::to_string(c) + " channels not divisible into " + std::to_string(opts.groups) + " groups");
    if (gamma.value().shape() != Shape{c} || beta.value().shape() != Shape{c})
        throw DimensionError("group_norm: affine parameters must have shape [" + std::to_string(c) + "]");
    const std::size_t cpg = c / opts.groups;
    const std::size_t span = cpg * plane;

    std::vector<double> mean(n * opts.groups), rstd(n * opts.groups);
    auto out = Tensor::uninitialized(x.shape());
    const float* gm = gamma.value().ptr();
    const float* bt = beta.value().ptr();
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t grp = 0; grp < opts.groups; ++grp) {
            const float* src = x.ptr() + (s * c + grp * cpg) * plane;
            double acc = 0.0;
            for (std::size_t i = 0; i < span; ++i)
                acc += src[i];
            const double mu = acc / static_cast<double>(span);
            double var = 0.0;
            for (std::size_t i = 0; i < span; ++i) {
                const double d = src[i] - mu;
                var += d * d;
            }
            var /= static_cast<double>(span);
            const double rs = 1.0 / std::sqrt(var + opts.eps);
            mean[s * opts.groups + grp] = mu;
            rstd[s * opts.groups + grp] = rs;
            float* dst = out.ptr() + (s * c + grp * cpg) * plane;
            for (std::size_t cl = 0; cl < cpg; ++cl) {
                const std::size_t ch = grp * cpg + cl;
                const auto a = static_cast<float>(rs) * gm[ch];
                const auto b = bt[ch] - static_cast<float>(mu * rs) * gm[ch];
                for (std::size_t i = 0; i < plane; ++i)
                    dst[cl * plane + i] = src[cl * plane + i] * a + b;
            }
        }
    }

    return make_result(std::move(out), {input, gamma, beta},
                       [n, c, plane, cpg, span, opts, mean = std::move(mean), rstd = std::move(rstd)](Node& self) {
                           Node& in = *self.inputs[0];
                           Node& gam = *self.inputs[1];
                           Node& bet = *self.inputs[2];
                           const float* x = in.value.ptr();
                           const float* dy = self.grad.ptr();
                           const float* gm = gam.value.ptr();
                           float* dx = in.requires_grad ? in.grad_slot().ptr() : nullptr;
                           float* dgamma = gam.requires_grad ? gam.grad_slot().ptr() : nullptr;
                           float* dbeta = bet.requires_grad ? bet.grad_slot().ptr() : nullptr;
                           std::vector<double> xhat(span);
                           for (std::size_t s = 0; s < n; ++s) {
                               for (std::size_t grp = 0; grp < opts.groups; ++grp) {
                                   const std::size_t base = (s * c + grp * cpg) * plane;
                                   const double mu = mean[s * opts.groups + grp];
                                   const double rs = rstd[s * opts.groups + grp];
                                   for (std::size_t i = 0; i < span; ++i)
                                       xhat[i] = (x[base + i] - mu) * rs;
                                   double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                                   for (std::size_t cl = 0; cl < cpg; ++cl) {
                                       const std::size_t ch = grp * cpg + cl;
                                       double dg = 0.0, db = 0.0;
                                       for (std::size_t i = 0; i < plane; ++i) {
                                           const double d = dy[base + cl * plane + i];
                                           const double xh = xhat[cl * plane + i];
                                           dg += d * xh;
                                           db += d;
                                           mean_dxhat += d * gm[ch];
                                           mean_dxhat_xhat += d * gm[ch] * xh;
                                       }
                                       if (dgamma)
                                           dgamma[ch] += static_cast<float>(dg);
                                       if (dbeta)
                                           dbeta[ch] += static_cast<float>(db);
                                   }
                                   if (!dx)
                                       continue;
                                   mean_dxhat /= static_cast<double>(span);
                                   mean_dxhat_xhat /= static_cast<double>(span);
                                   for (std::size_t cl = 0; cl < cpg; ++cl) {
                                       const double gch = gm[grp * cpg + cl];
                                       for (std::size_t i = 0; i < plane; ++i) {
                                           const std::size_t j = cl * plane + i;
                                           const double dxhat = dy[base + j] * gch;
                                           const double v = opts.detach_stats
                                                                ? dxhat * rs
                                                                : rs * (dxhat - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                                           dx[base + j] += static_cast<float>(v);
                                       }
                                   }
                               }
                           }
                       });
}

Var relu(const Var& x)
{
    auto out = Tensor::uninitialized(x.shape());
    const float* src = x.value().ptr();
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = src[i] > 0.0f ? src[i] : 0.0f;
    return make_result(std::move(out), {x}, [](Node& self) {
        Node& in = *self.inputs[0];
        float* dx = in.grad_slot().ptr();
        const float* v = in.value.ptr();
        const float* dy = self.grad.ptr();
        for (std::size_t i = 0; i < self.grad.numel(); ++i)
            if (v[i] > 0.0f)
                dx[i] += dy[i];
    });
}

Var add(const Var& a, const Var& b)
{
    require_same_shape(a.value(), b.value(), "add");
    auto out = Tensor::uninitialized(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = a.value()[i] + b.value()[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
        for (auto& in : self.inputs) {
            if (!in->requires_grad)
                continue;
            float* d = in->grad_slot().ptr();
            for (std::size_t i = 0; i < self.grad.numel(); ++i)
                d[i] += self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b)
{
    require_same_shape(a.value(), b.value(), "mul");
    auto out = Tensor::uninitialized(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = a.value()[i] * b.value()[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        const Tensor& va = na.value;
        const Tensor& vb = nb.value;
        if (na.requires_grad) {
            float* d = na.grad_slot().ptr();
            for (std::size_t i = 0; i < self.grad.numel(); ++i)
                d[i] += self.grad[i] * vb[i];
        }
        if (nb.requires_grad) {
            float* d = nb.grad_slot().ptr();
            for (std::size_t i = 0; i < self.grad.numel(); ++i)
                d[i] += self.grad[i] * va[i];
        }
    });
}

Var scale(const Var& x, float factor)
{
    auto out = Tensor::uninitialized(x.shape());
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = x.value()[i] * factor;
    return make_result(std::move(out), {x}, [factor](Node& self) {
        float* d = self.inputs[0]->grad_slot().ptr();
        for (std::size_t i = 0; i < self.grad.numel(); ++i)
            d[i] += self.grad[i] * factor;
    });
}

Var sum(const Var& x)
{
    Tensor out({1}, static_cast<float>(x.value().sum()));
    return make_result(std::move(out), {x}, [](Node& self) {
        const float g = self.grad[0];
        float* d = self.inputs[0]->grad_slot().ptr();
        for (std::size_t i = 0; i < self.inputs[0]->value.numel(); ++i)
            d[i] += g;
    });
}

Var global_avg_pool(const Var& x)
{
    require_rank(x.value(), 4, "global_avg_pool");
    const std::size_t n = x.value().dim(0), c = x.value().dim(1), plane = x.value().dim(2) * x.value().dim(3);
    auto out = Tensor::uninitialized({n, c});
    const float* src = x.value().ptr();
    for (std::size_t i = 0; i < n * c; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < plane; ++j)
            acc += src[i * plane + j];
        out[i] = static_cast<float>(acc / static_cast<double>(plane));
    }
    return make_result(std::move(out), {x}, [n, c, plane](Node& self) {
        float* d = self.inputs[0]->grad_slot().ptr();
        const float inv = 1.0f / static_cast<float>(plane);
        for (std::size_t i = 0; i < n * c; ++i) {
            const float g = self.grad[i] * inv;
            for (std::size_t j = 0; j < plane; ++j)
                d[i * plane + j] += g;
        }
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias)
{
    require_rank(x.value(), 2, "linear input");
    require_rank(weight.value(), 2, "linear weight");
    const std::size_t n = x.value().dim(0), f = x.value().dim(1), o = weight.value().dim(0);
    if (weight.value().dim(1) != f || bias.value().shape() != Shape{o})
        throw DimensionError("linear: input " + shape_to_string(x.shape()) + " weight " + shape_to_string(weight.shape()) +
                             " bias " + shape_to_string(bias.shape()));
    auto out = Tensor::uninitialized({n, o});
    const float* xs = x.value().ptr();
    const float* ws = weight.value().ptr();
    const float* bs = bias.value().ptr();
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t j = 0; j < o; ++j)
            out[s * o + j] = kernels::dot(xs + s * f, ws + j * f, f) + bs[j];
    return make_result(std::move(out), {x, weight, bias}, [n, f, o](Node& self) {
        Node& in = *self.inputs[0];
        Node& w = *self.inputs[1];
        Node& b = *self.inputs[2];
        const float* dy = self.grad.ptr();
        if (in.requires_grad) {
            float* dx = in.grad_slot().ptr();
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t j = 0; j < o; ++j)
                    kernels::axpy(dy[s * o + j], w.value.ptr() + j * f, dx + s * f, f);
        }
        if (w.requires_grad) {
            float* dw = w.grad_slot().ptr();
            for (std::size_t j = 0; j < o; ++j)
                for (std::size_t s = 0; s < n; ++s)
                    kernels::axpy(dy[s * o + j], in.value.ptr() + s * f, dw + j * f, f);
        }
        if (b.requires_grad) {
            float* db = b.grad_slot().ptr();
            for (std::size_t j = 0; j < o; ++j) {
                double acc = 0.0;
                for (std::size_t s = 0; s < n; ++s)
                    acc += dy[s * o + j];
                db[j] += static_cast<float>(acc);
            }
        }
    });
}

Var cross_entropy(const Var& logits, std::span<const int> labels, float label_smoothing)
{
    require_rank(logits.value(), 2, "cross_entropy logits");
    const std::size_t n = logits.value().dim(0), k = logits.value().dim(1);
    if (labels.size() != n)
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
    if (!(label_smoothing >= 0.0f && label_smoothing < 1.0f))
        throw ContractError("cross_entropy: label smoothing must lie in [0, 1)");
    const double off = static_cast<double>(label_smoothing) / static_cast<double>(k);
    const double on = 1.0 - static_cast<double>(label_smoothing) + off;

    std::vector<double> probs(n * k);
    double total = 0.0;
    const float* z = logits.value().ptr();
    for (std::size_t s = 0; s < n; ++s) {
        const int y = labels[s];
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw ContractError("cross_entropy: label " + std::to_string(y) + " outside [0, " + std::to_string(k) + ")");
        double zmax = z[s * k];
        for (std::size_t j = 1; j < k; ++j)
            zmax = std::max(zmax, static_cast<double>(z[s * k + j]));
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            denom += std::exp(z[s * k + j] - zmax);
        const double log_denom = std::log(denom);
        double row = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double logp = z[s * k + j] - zmax - log_denom;
            probs[s * k + j] = std::exp(logp);
            row -= (static_cast<std::size_t>(y) == j ? on : off) * logp;
        }
        total += row;
    }
    Tensor out({1}, static_cast<float>(total / static_cast<double>(n)));
    if (!out.all_finite())
        throw NumericError("cross_entropy: non-finite loss");
    std::vector<int> ys(labels.begin(), labels.end());
    return make_result(std::move(out), {logits}, [n, k, on, off, probs = std::move(probs), ys = std::move(ys)](Node& self) {
        float* d = self.inputs[0]->grad_slot().ptr();
        const double g = self.grad[0] / static_cast<double>(n);
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t j = 0; j < k; ++j) {
                const double q = static_cast<std::size_t>(ys[s]) == j ? on : off;
                d[s * k + j] += static_cast<float>(g * (probs[s * k + j] - q));
            }
    });
}

} // namespace allocnas
