// SPDX-License-Identifier: Apache-2.0
//
// nfisr - near-field inverse source imaging with modulated signals
// Copyright (C) 2026 The nfisr authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef NFISR_PARALLEL_HPP
#define NFISR_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace nfisr
{
    // Worker count taken from NFISR_THREADS (default: hardware concurrency).
    std::size_t thread_count();

    // Runs body(i) for i in [begin, end) on static contiguous chunks. Each index is visited exactly
    // once, so writes to per-index output slots are schedule independent. The first exception thrown
    // by any worker is rethrown on the caller's thread.
    void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)> &body);
}

#endif // NFISR_PARALLEL_HPP
