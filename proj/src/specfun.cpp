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

#include "nfisr/specfun.hpp"

#include <utility>
#include <vector>

namespace nfisr
{
    double legendre_p(int l, double x)
    {
        if (l < 0)
            throw Error(ErrorKind::domain, "legendre_p: negative degree");
        if (!(std::abs(x) <= 1.0 + 1e-12))
            throw Error(ErrorKind::domain, "legendre_p: |x| > 1");
        double p_prev = 1.0, p = x;
        if (l == 0)
            return p_prev;
        for (int n = 1; n < l; ++n)
        {
            const double p_next = ((2 * n + 1) * x * p - n * p_prev) / (n + 1);
            p_prev = p;
            p = p_next;
        }
        return p;
    }

    double sph_bessel_j_series(int l, double x)
    {
        // j_l(x) = x^l / (2l+1)!! * sum_k (-x^2/2)^k / (k! (2l+3)(2l+5)...(2l+2k+1))
        double lead = 1.0;
        for (int n = 1; n <= l; ++n)
        {
            lead *= x / double(2 * n + 1);
            if (lead == 0.0)
                return 0.0;
        }
        const double h = -0.5 * x * x;
        double term = 1.0, sum = 1.0;
        for (int k = 1; k < 500; ++k)
        {
            term *= h / (double(k) * double(2 * l + 2 * k + 1));
            sum += term;
            if (std::abs(term) < 1e-17 * std::abs(sum))
                break;
        }
        return lead * sum;
    }

    void sph_hankel2_table(int lmax, double x, std::span<cplx> out)
    {
        if (!(x > 0.0))
            throw Error(ErrorKind::domain, "sph_hankel2: argument must be positive");
        if (lmax < 0)
            throw Error(ErrorKind::domain, "sph_hankel2: negative order");

        const double s = std::sin(x), c = std::cos(x);
        double y_prev = -c / x;                // y_0
        double y_curr = -c / (x * x) - s / x;  // y_1
        double j_prev = s / x;                 // j_0
        double j_curr = x < 1.0 ? sph_bessel_j_series(1, x) : s / (x * x) - c / x; // j_1

        out[0] = cplx(j_prev, -y_prev);
        if (lmax >= 1)
            out[1] = cplx(j_curr, -y_curr);

        bool upward_j = true;
        for (int l = 1; l < lmax; ++l)
        {
            const double f = double(2 * l + 1) / x;
            const double y_next = f * y_curr - y_prev;
            if (!(std::abs(y_next) <= 1e300))
                throw Error(ErrorKind::overflow, "sph_hankel2: |h_" + std::to_string(l + 1) + "(" + std::to_string(x) +
                                                     ")| exceeds 1e300");
            y_prev = y_curr;
            y_curr = y_next;

            double j_next;
            if (upward_j && double(l + 1) <= x)
            {
                j_next = f * j_curr - j_prev;
                j_prev = j_curr;
                j_curr = j_next;
            }
            else
            {
                upward_j = false;
                j_next = sph_bessel_j_series(l + 1, x);
            }
            out[l + 1] = cplx(j_next, -y_next);
        }
    }

    cplx sph_hankel2(int l, double x)
    {
        if (l < 0)
            throw Error(ErrorKind::domain, "sph_hankel2: negative order");
        std::vector<cplx> table(std::size_t(l) + 1);
        sph_hankel2_table(l, x, table);
        return table[std::size_t(l)];
    }

    GaussLegendreRule gauss_legendre(int n)
    {
        if (n < 1)
            throw Error(ErrorKind::domain, "gauss_legendre: n must be positive");

        GaussLegendreRule rule;
        rule.nodes.resize(n);
        rule.weights.resize(n);
        const auto legendre_and_derivative = [n](double z)
        {
            double p0 = 1.0, p1 = z;
            for (int l = 1; l < n; ++l)
            {
                const double p2 = ((2 * l + 1) * z * p1 - l * p0) / (l + 1);
                p0 = p1;
                p1 = p2;
            }
            return std::pair<double, double>{p1, n * (z * p1 - p0) / (z * z - 1.0)};
        };

        const int half = (n + 1) / 2;
        for (int i = 0; i < half; ++i)
        {
            // Newton iteration from the Chebyshev-like initial guess, largest root first
            double z = std::cos(pi * (i + 0.75) / (n + 0.5));
            for (int it = 0; it < 100; ++it)
            {
                const auto [p, dp] = legendre_and_derivative(z);
                const double dz = p / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16)
                    break;
            }
            const double dp = legendre_and_derivative(z).second;
            const double w = 2.0 / ((1.0 - z * z) * dp * dp);
            rule.nodes[i] = -z;
            rule.nodes[n - 1 - i] = z;
            rule.weights[i] = w;
            rule.weights[n - 1 - i] = w;
        }
        if (n % 2 == 1)
            rule.nodes[n / 2] = 0.0;
        return rule;
    }

    QuadratureGrid sphere_quadrature(int band_limit)
    {
        if (band_limit < 1)
            throw Error(ErrorKind::domain, "sphere_quadrature: band limit must be positive");

        const GaussLegendreRule gl = gauss_legendre(band_limit + 1);
        QuadratureGrid grid;
        grid.band_limit = band_limit;
        grid.n_theta = band_limit + 1;
        grid.n_phi = 2 * band_limit + 2;
        const Index q_count = Index(grid.n_theta) * grid.n_phi;
        grid.directions.resize(3, q_count);
        grid.weights.resize(q_count);

        const double w_phi = 2.0 * pi / grid.n_phi;
        for (int it = 0; it < grid.n_theta; ++it)
        {
            const double ct = gl.nodes[it];
            const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
            for (int ip = 0; ip < grid.n_phi; ++ip)
            {
                const double phi = w_phi * ip;
                const Index q = grid.index(it, ip);
                grid.directions.col(q) << st * std::cos(phi), st * std::sin(phi), ct;
                grid.weights[q] = gl.weights[it] * w_phi;
            }
        }
        return grid;
    }
}
