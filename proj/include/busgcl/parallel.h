// Copyright 2026 The BusGCL Authors.
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

#ifndef BUSGCL_PARALLEL_H_
#define BUSGCL_PARALLEL_H_

#ifdef _OPENMP
#include <omp.h>
#endif

namespace busgcl {

// Thread count for internal parallel loops. With OpenMP this follows
// BUSGCL_THREADS (via set_max_threads) or the OpenMP default; without it,
// everything is sequential.
inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_max_threads(int n);

}  // namespace busgcl

#endif  // BUSGCL_PARALLEL_H_
