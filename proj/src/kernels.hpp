#pragma once

// Small dense kernels shared by the ops. Every output element accumulates
// its terms in a fixed order, so results are bit-reproducible for identical
// inputs regardless of blocking.

#include <cstddef>

namespace allocnas::kernels {

/// Dot product with eight fixed partial sums.
inline float dot(const float* a, const float* b, std::size_t n)
{
    float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (std::size_t l = 0; l < 8; ++l)
            acc[l] += a[i + l] * b[i + l];
    float s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; i < n; ++i)
        s += a[i] * b[i];
    return s;
}

inline void axpy(float alpha, const float* x, float* y, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i)
        y[i] += alpha * x[i];
}

/// C[M,N] += A * B[K,N] where A(i, p) = a[i * a_row + p * a_col].
/// Column blocks of C stay in registers across the whole K loop.
inline void gemm_strided_a(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t a_row, std::size_t a_col,
                           const float* b, float* c)
{
    constexpr std::size_t nb = 16;
    std::size_t j0 = 0;
    for (; j0 + nb <= n; j0 += nb) {
        std::size_t i = 0;
        for (; i + 2 <= m; i += 2) {
            float acc0[nb], acc1[nb];
            float* c0 = c + i * n + j0;
            float* c1 = c0 + n;
            for (std::size_t l = 0; l < nb; ++l) {
                acc0[l] = c0[l];
                acc1[l] = c1[l];
            }
            for (std::size_t p = 0; p < k; ++p) {
                const float a0 = a[i * a_row + p * a_col];
                const float a1 = a[(i + 1) * a_row + p * a_col];
                const float* brow = b + p * n + j0;
                for (std::size_t l = 0; l < nb; ++l) {
                    acc0[l] += a0 * brow[l];
                    acc1[l] += a1 * brow[l];
                }
            }
            for (std::size_t l = 0; l < nb; ++l) {
                c0[l] = acc0[l];
                c1[l] = acc1[l];
            }
        }
        for (; i < m; ++i) {
            float acc[nb];
            float* c0 = c + i * n + j0;
            for (std::size_t l = 0; l < nb; ++l)
                acc[l] = c0[l];
            for (std::size_t p = 0; p < k; ++p) {
                const float a0 = a[i * a_row + p * a_col];
                const float* brow = b + p * n + j0;
                for (std::size_t l = 0; l < nb; ++l)
                    acc[l] += a0 * brow[l];
            }
            for (std::size_t l = 0; l < nb; ++l)
                c0[l] = acc[l];
        }
    }
    if (j0 == n)
        return;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const float a0 = a[i * a_row + p * a_col];
            const float* brow = b + p * n;
            float* crow = c + i * n;
            for (std::size_t j = j0; j < n; ++j)
                crow[j] += a0 * brow[j];
        }
}

/// C[M,N] += A[M,K] * B[K,N]
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c)
{
    gemm_strided_a(m, n, k, a, k, 1, b, c);
}

/// C[M,N] += A[K,M]^T * B[K,N]
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c)
{
    gemm_strided_a(m, n, k, a, 1, m, b, c);
}

/// C[M,N] += A[M,K] * B[N,K]^T (row-by-row dot products, four B rows at a time).
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c)
{
    for (std::size_t i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const float* b0 = b + j * k;
            const float* b1 = b0 + k;
            const float* b2 = b1 + k;
            const float* b3 = b2 + k;
            float s0[8] = {}, s1[8] = {}, s2[8] = {}, s3[8] = {};
            std::size_t p = 0;
            for (; p + 8 <= k; p += 8)
                for (std::size_t l = 0; l < 8; ++l) {
                    const float av = arow[p + l];
                    s0[l] += av * b0[p + l];
                    s1[l] += av * b1[p + l];
                    s2[l] += av * b2[p + l];
                    s3[l] += av * b3[p + l];
                }
            auto reduce = [](const float* s) { return ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7])); };
            float r0 = reduce(s0), r1 = reduce(s1), r2 = reduce(s2), r3 = reduce(s3);
            for (; p < k; ++p) {
                r0 += arow[p] * b0[p];
                r1 += arow[p] * b1[p];
                r2 += arow[p] * b2[p];
                r3 += arow[p] * b3[p];
            }
            c[i * n + j] += r0;
            c[i * n + j + 1] += r1;
            c[i * n + j + 2] += r2;
            c[i * n + j + 3] += r3;
        }
        for (; j < n; ++j)
            c[i * n + j] += dot(arow, b + j * k, k);
    }
}

} // namespace allocnas::kernels
