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

#include "nfisr/parallel.hpp"
#include "nfisr/types.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nfisr
{
    std::size_t thread_count()
    {
        if (const char *env = std::getenv("NFISR_THREADS"))
        {
            const long n = std::strtol(env, nullptr, 10);
            if (n > 0)
                return static_cast<std::size_t>(n);
        }
        return std::max<std::size_t>(1, std::thread::hardware_concurrency());
    }

    void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)> &body)
    {
        if (end <= begin)
            return;
        const std::size_t n = end - begin;
        const std::size_t workers = std::min(thread_count(), n);
        if (workers <= 1)
        {
            for (std::size_t i = begin; i < end; ++i)
                body(i);
            return;
        }

        std::exception_ptr first_error;
        std::mutex error_lock;
        std::vector<std::thread> pool;
        pool.reserve(workers);
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w)
        {
            const std::size_t lo = begin + w * chunk;
            const std::size_t hi = std::min(end, lo + chunk);
            if (lo >= hi)
                break;
            pool.emplace_back([&, lo, hi]
                              {
                try
                {
                    for (std::size_t i = lo; i < hi; ++i)
                        body(i);
                }
                catch (...)
                {
                    std::lock_guard<std::mutex> guard(error_lock);
                    if (!first_error)
                        first_error = std::current_exception();
                } });
        }
        for (auto &t : pool)
            t.join();
        if (first_error)
            std::rethrow_exception(first_error);
    }
}
