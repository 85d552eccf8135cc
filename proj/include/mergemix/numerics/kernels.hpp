// Copyright 2026 The MergeMix Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <string_view>

// Dense inner loops behind the tensor ops. Every kernel has a scalar
// reference implementation and, on x86-64, an AVX2+FMA variant. The active
// table is chosen once at startup from CPU features; MERGEMIX_KERNELS=scalar
// (or avx2) pins it explicitly.
//
// All matrices are row-major and contiguous. The gemm kernels accumulate
// into C.

namespace mergemix::nx::kernels {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  Backend backend;
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // C[m x n] += A[m x k] * B[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
};

const KernelTable& scalar_table();
/// nullptr when the variant was not compiled in or the CPU lacks the ISA.
const KernelTable* avx2_table();

bool available(Backend backend);
std::string_view name(Backend backend);

/// The table used by the tensor ops.
const KernelTable& active();
/// Throws DomainError if the backend is unavailable on this host.
void select(Backend backend);

}  // namespace mergemix::nx::kernels
