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

#ifndef NFISR_SPECFUN_HPP
#define NFISR_SPECFUN_HPP

#include "nfisr/types.hpp"

#include <cmath>
#include <span>

namespace nfisr
{
    // Legendre polynomial P_l(x) by the three-term recurrence
    // - Throws ErrorKind::domain for |x| > 1 + 1e-12 or l < 0
    double legendre_p(int l, double x);

    // Fills out[0..lmax] with P_0(x) .. P_lmax(x); out.size() must be at least lmax + 1
    template <typename Scalar>
    void legendre_table(int lmax, Scalar x, std::span<Scalar> out)
    {
        out[0] = Scalar(1);
        if (lmax >= 1)
            out[1] = x;
        for (int l = 1; l < lmax; ++l)
            out[l + 1] = (Scalar(2 * l + 1) * x * out[l] - Scalar(l) * out[l - 1]) / Scalar(l + 1);
    }

    // Spherical Hankel function of the second kind, h_l^(2)(x) = j_l(x) - i*y_l(x).
    //
    // The imaginary part (-y_l) always comes from upward recurrence, which is stable for the dominant
    // solution. The real part j_l uses upward recurrence while l <= x and the ascending power series
    // above the turning point, where upward recurrence of j_l would lose all significant digits.
    // - Throws ErrorKind::domain for x <= 0
    // - Throws ErrorKind::overflow when |y_l| exceeds 1e300
    cplx sph_hankel2(int l, double x);

    // Table version; out.size() must be at least lmax + 1
    void sph_hankel2_table(int lmax, double x, std::span<cplx> out);

    // Spherical Bessel j_l(x) by the ascending series; accurate for l >= x, used above the turning point
    double sph_bessel_j_series(int l, double x);

    struct GaussLegendreRule
    {
        Eigen::VectorXd nodes;   // ascending, in (-1, 1)
        Eigen::VectorXd weights; // positive, sum to 2
    };

    // n-point Gauss-Legendre rule, exact for polynomials of degree <= 2n - 1
    GaussLegendreRule gauss_legendre(int n);

    // Product rule on the unit sphere: Gauss-Legendre in cos(theta), trapezoidal in phi
    struct QuadratureGrid
    {
        Points directions;       // unit vectors, 3 x Q
        Eigen::VectorXd weights; // steradian, sum to 4*pi
        int band_limit = 0;      // L; spherical harmonics of degree <= 2L integrate exactly
        int n_theta = 0;         // L + 1
        int n_phi = 0;           // 2L + 2

        Index size() const { return weights.size(); }

        // Direction index of (theta node, phi node)
        Index index(int i_theta, int i_phi) const { return Index(i_theta) * n_phi + i_phi; }
    };

    QuadratureGrid sphere_quadrature(int band_limit);
}

#endif // NFISR_SPECFUN_HPP
