// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace clstm {

/// Runs fn(i) for i in [0, n) over `jobs` threads in contiguous blocks.
/// The first exception thrown by any worker is rethrown after all join.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace clstm
