// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace semsplat {

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items are
/// claimed dynamically, so fn must only write state owned by item i.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

/// Number of workers to use when the caller passes threads <= 0.
int default_thread_count();

}  // namespace semsplat
