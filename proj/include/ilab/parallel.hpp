// Copyright 2026 The Invarilab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <exception>
#include <utility>

namespace ilab {

/// Parallel loop over [0, n) that survives exceptions: an OpenMP region
/// would otherwise terminate the process when a body throws. The first
/// captured exception is rethrown after the loop.
template <class Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
  std::exception_ptr err = nullptr;
#pragma omp parallel shared(err)
  {
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
#pragma omp critical(ilab_parallel_for_err)
        {
          if (!err) err = std::current_exception();
        }
      }
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace ilab
