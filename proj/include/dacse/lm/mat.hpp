#pragma once

#include <cstddef>

#include "dacse/threading.hpp"

namespace dacse::mat {

// Dense kernels behind the transformer. Every kernel writes each output
// element from exactly one worker with a fixed inner summation order, so
// results are bitwise identical for any jobs() setting. Templated on the
// scalar so the gradient checker can run the whole model in double.

// Eight-lane partial sums: fixed order (deterministic) and wide enough for the
// autovectorizer to turn into SIMD lanes.
template <typename T>
T dot(const T* a, const T* b, size_t n) {
    T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
    for (; i < n; ++i) acc[i % 8] += a[i] * b[i];
    const T s01 = acc[0] + acc[1];
    const T s23 = acc[2] + acc[3];
    const T s45 = acc[4] + acc[5];
    const T s67 = acc[6] + acc[7];
    return (s01 + s23) + (s45 + s67);
}

// C[m,n] += A[m,k] * B[k,n]. i-k-j order: the j loop streams rows of B and C.
template <typename T>
void gemm_nn(T* C, const T* A, const T* B, size_t m, size_t k, size_t n) {
    parallel_for(m, [=](size_t i0, size_t i1) {
        for (size_t i = i0; i < i1; ++i) {
            T* c = C + i * n;
            const T* a = A + i * k;
            for (size_t kk = 0; kk < k; ++kk) {
                const T av = a[kk];
                const T* b = B + kk * n;
                for (size_t j = 0; j < n; ++j) c[j] += av * b[j];
            }
        }
    }, /*min_grain=*/4);
}

// C[m,n] += A[m,k] * B^T, with B stored [n,k]: row-by-row dot products.
template <typename T>
void gemm_nt(T* C, const T* A, const T* B, size_t m, size_t k, size_t n) {
    parallel_for(m, [=](size_t i0, size_t i1) {
        for (size_t i = i0; i < i1; ++i) {
            T* c = C + i * n;
            const T* a = A + i * k;
            for (size_t j = 0; j < n; ++j) c[j] += dot(a, B + j * k, k);
        }
    }, /*min_grain=*/4);
}

// C[m,n] += A^T * B, with A stored [k,m] and B stored [k,n]. Used for weight
// gradients (dW = dY^T X). Row i of C reads column i of A.
template <typename T>
void gemm_tn(T* C, const T* A, const T* B, size_t m, size_t k, size_t n) {
    parallel_for(m, [=](size_t i0, size_t i1) {
        for (size_t i = i0; i < i1; ++i) {
            T* c = C + i * n;
            for (size_t kk = 0; kk < k; ++kk) {
                const T av = A[kk * m + i];
                const T* b = B + kk * n;
                for (size_t j = 0; j < n; ++j) c[j] += av * b[j];
            }
        }
    }, /*min_grain=*/4);
}

}  // namespace dacse::mat
