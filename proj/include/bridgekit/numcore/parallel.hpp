// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <functional>

namespace bridgekit {

/// Worker count: hardware threads, capped by BRIDGEKIT_THREADS when set.
std::size_t worker_threads();

/// Runs fn(0) .. fn(n - 1) across worker_threads() threads and waits.
///
/// Work is handed out dynamically, so fn must write only to slot i of
/// its outputs; callers reduce the slots afterwards in index order, which
/// keeps results independent of the thread count. The first exception
/// thrown by any call is rethrown here.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace bridgekit
