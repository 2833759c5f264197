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

#ifndef NFISR_PWS_HPP
#define NFISR_PWS_HPP

#include "nfisr/specfun.hpp"
#include "nfisr/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

// Plane-wave-spectrum (PWS) representation of equivalent sources and the single-level multipole
// translation operator.
//
// A region with center c radiates at probe r the field
//
//     E(r) = (-j / 4pi) * sum_q w_q * T_L(k_q, r - c) * (I - k_q k_q^T) * s_q
//
// where s_q are the transverse spectrum samples on the quadrature directions k_q. With this
// normalization a point current p at c + d has the spectrum s_q = (k / 4pi) (I - k_q k_q^T) p exp(+j k k_q.d),
// which reproduces dipole_field() of em_forward.hpp exactly in the limit of large L.

namespace nfisr
{
    enum class SourceRole
    {
        incident, // transmitter region
        scattered // target region
    };

    const char *role_name(SourceRole role);
    SourceRole parse_role(const std::string &name);

    struct SourceRegion
    {
        Vec3 center = Vec3::Zero();
        double radius = 0.0; // m, sphere enclosing all sources of the region
        SourceRole role = SourceRole::scattered;
        int order = 4;       // translation operator order L
    };

    using GridPtr = std::shared_ptr<const QuadratureGrid>;

    struct PlaneWaveSpectrum
    {
        SourceRegion region;
        double frequency = 0.0; // Hz
        GridPtr grid;
        CField samples;         // 3 x Q, transverse to the grid directions

        // Largest |k_q . s_q| / |s_q| over all directions (0 for an all-zero spectrum)
        double transversality_defect() const;
        void validate() const;
    };

    // Excess-bandwidth rule L = ceil(kD/2 + 1.8 * digits^(2/3) * (kD/2)^(1/3)), clamped to >= 4
    int select_order(double k, double diameter, double digits);

    // T_L(k_q, X) = sum_{l=0}^{L} (-j)^l (2l+1) h_l^(2)(k|X|) P_l(k_q . X/|X|) for every grid direction
    // - Throws ErrorKind::singular_translation for X == 0
    Eigen::VectorXcd translation_operator(int order, double k, const Vec3 &X, const QuadratureGrid &grid);

    // Shared grid for a set of regions: band limit = largest region order
    GridPtr make_grid(const std::vector<SourceRegion> &regions);

    // (I - k k^T) applied column-wise
    CField project_transverse(const QuadratureGrid &grid, const CField &samples);

    // Spectrum of a point current `moment` at `position`, expanded about `center`
    CField point_source_spectrum(const QuadratureGrid &grid, double k, const Vec3 &center, const Vec3 &position,
                                 const CVec3 &moment);

    // Matrix-free linear map from the spectra of a set of regions (all at one frequency, one shared
    // grid) to selected Cartesian field components at the probes. Translation kernels are tabulated
    // once per operator. The spectrum space uses the quadrature-weighted inner product
    //     <a, b> = sum_regions sum_q w_q a_q^H b_q,
    // and adjoint() is the adjoint with respect to it.
    class PlaneWaveOperator
    {
    public:
        // - Throws ErrorKind::validity if a probe lies inside a region sphere
        // - Throws ErrorKind::config if a region order exceeds the grid band limit
        PlaneWaveOperator(std::vector<SourceRegion> regions, GridPtr grid, double frequency_hz, Points probes,
                          std::vector<Component> components);

        // Field samples, n_probes x n_components
        Eigen::MatrixXcd apply(const std::vector<CField> &spectra) const;

        // Transverse spectra, one 3 x Q block per region
        std::vector<CField> adjoint(const Eigen::MatrixXcd &residual) const;

        // Weighted spectrum-space inner product and norm
        cplx dot(const std::vector<CField> &a, const std::vector<CField> &b) const;
        double norm(const std::vector<CField> &a) const { return std::sqrt(std::max(0.0, dot(a, a).real())); }

        std::vector<CField> zero_spectra() const;

        const std::vector<SourceRegion> &regions() const { return regions_; }
        const GridPtr &grid() const { return grid_; }
        double frequency() const { return frequency_; }
        double k() const { return k_; }
        Index n_probes() const { return probes_.cols(); }
        Index n_components() const { return Index(components_.size()); }
        const Points &probes() const { return probes_; }
        const std::vector<Component> &components() const { return components_; }

        // Relative adjoint-identity defect |<Ax, y> - <x, A*y>| / (|Ax||y|) for seeded random x, y
        double adjoint_defect(std::uint64_t seed) const;

    private:
        std::vector<SourceRegion> regions_;
        GridPtr grid_;
        double frequency_;
        double k_;
        Points probes_;
        std::vector<Component> components_;
        std::vector<Eigen::MatrixXcd> kernels_; // per region, n_probes x Q
    };

    // Field of a list of spectra at the probes (n_probes x n_components)
    // - Throws ErrorKind::validity naming the probe/region pair when a probe lies inside a region
    Eigen::MatrixXcd forward_field(const std::vector<PlaneWaveSpectrum> &spectra, const Points &probes,
                                   const std::vector<Component> &components);

    // Adjoint of forward_field for the given regions (one spectrum per region)
    std::vector<PlaneWaveSpectrum> adjoint_field(const Eigen::MatrixXcd &residual, const std::vector<SourceRegion> &regions,
                                                 const GridPtr &grid, double frequency_hz, const Points &probes,
                                                 const std::vector<Component> &components);
}

#endif // NFISR_PWS_HPP
