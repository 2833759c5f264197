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

#include "nfisr/random.hpp"

#include <cmath>

namespace nfisr
{
    namespace
    {
        std::uint64_t fnv1a(std::string_view s)
        {
            std::uint64_t h = 1469598103934665603ULL;
            for (unsigned char ch : s)
            {
                h ^= ch;
                h *= 1099511628211ULL;
            }
            return h;
        }

        std::mt19937_64 make_engine(std::uint64_t seed, std::string_view stream, std::uint64_t index)
        {
            const std::uint64_t name = fnv1a(stream);
            std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(name), std::uint32_t(name >> 32),
                              std::uint32_t(index), std::uint32_t(index >> 32)};
            return std::mt19937_64(seq);
        }
    }

    Rng::Rng(std::uint64_t seed, std::string_view stream, std::uint64_t index)
        : engine_(make_engine(seed, stream, index))
    {
    }

    double Rng::uniform()
    {
        return double(engine_() >> 11) * 0x1.0p-53;
    }

    double Rng::normal()
    {
        double u1 = uniform();
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
    }

    cplx Rng::complex_normal()
    {
        const double re = normal();
        const double im = normal();
        return cplx(re, im) * std::sqrt(0.5);
    }
}
