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

#ifndef NFISR_RANDOM_HPP
#define NFISR_RANDOM_HPP

#include "nfisr/types.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace nfisr
{
    // Deterministic random stream. Conversions from raw 64-bit draws are done here rather than with
    // the <random> distributions, whose output is implementation defined.
    class Rng
    {
    public:
        // Independent stream identified by (seed, name, index), e.g. ("modulation", 0) or ("payload", m)
        Rng(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0);

        std::uint64_t next() { return engine_(); }
        double uniform(); // [0, 1)
        double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
        double normal();  // zero mean, unit variance (Box-Muller)
        cplx complex_normal(); // circular, E|z|^2 = 1

    private:
        std::mt19937_64 engine_;
    };
}

#endif // NFISR_RANDOM_HPP
