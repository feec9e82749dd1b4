// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace dsu {

// Runs task(i) for every i in [0, n) on up to `threads` workers. Tasks must
// write only to slots owned by their index; callers reduce the slots in
// index order, so results never depend on the worker count. threads == 0
// means hardware concurrency.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& task);

unsigned resolve_threads(unsigned requested);

}  // namespace dsu
