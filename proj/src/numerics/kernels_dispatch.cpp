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

#include <cstdlib>
#include <string>

#include "mergemix/error.hpp"
#include "mergemix/numerics/kernels.hpp"

namespace mergemix::nx::kernels {
namespace {

const KernelTable* initial_table() {
  if (const char* env = std::getenv("MERGEMIX_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2") {
      if (const KernelTable* t = avx2_table()) return t;
      throw DomainError("MERGEMIX_KERNELS=avx2 but AVX2/FMA is unavailable on this host");
    }
    throw DomainError("MERGEMIX_KERNELS must be 'scalar' or 'avx2', got '" + want + "'");
  }
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

const KernelTable*& current() {
  static const KernelTable* table = initial_table();
  return table;
}

}  // namespace

bool available(Backend backend) {
  return backend == Backend::kScalar || avx2_table() != nullptr;
}

std::string_view name(Backend backend) {
  return backend == Backend::kScalar ? "scalar" : "avx2";
}

const KernelTable& active() { return *current(); }

void select(Backend backend) {
  if (backend == Backend::kScalar) {
    current() = &scalar_table();
    return;
  }
  const KernelTable* t = avx2_table();
  if (t == nullptr) throw DomainError("avx2 kernels unavailable on this host");
  current() = t;
}

}  // namespace mergemix::nx::kernels
