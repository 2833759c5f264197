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

#ifndef NFISR_IMAGING_HPP
#define NFISR_IMAGING_HPP

#include "nfisr/pws.hpp"
#include "nfisr/types.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace nfisr
{
    // Raised-cosine angular window around a center direction
    struct SpectralWindow
    {
        Vec3 center_direction = Vec3::UnitZ();
        double cutoff = 0.5 * pi; // rad, in (0, pi]
        double taper = 0.25;      // fraction of the cutoff angle used for the roll-off, in [0, 1]

        void validate() const;
    };

    // 1 for angle <= (1 - taper) * cutoff, cosine roll-off to 0 at the cutoff, 0 beyond
    double spectral_window(const Vec3 &k_hat, const SpectralWindow &window);

    // Regular voxel lattice; voxel (i, j, l) sits at origin + i*dx*a0 + j*dy*a1 + l*dz*a2,
    // flat index (l * ny + j) * nx + i
    struct VoxelGrid
    {
        Vec3 origin = Vec3::Zero();
        Mat3 axes = Mat3::Identity(); // orthonormal columns a0, a1, a2
        std::array<int, 3> counts{1, 1, 1};
        Vec3 spacing = Vec3::Ones();  // m

        // Axis-aligned box [lo, hi] sampled with the given spacing (counts rounded to cover the box)
        static VoxelGrid box(const Vec3 &lo, const Vec3 &hi, double spacing);

        Index size() const { return Index(counts[0]) * counts[1] * counts[2]; }
        Index index(int i, int j, int l) const { return (Index(l) * counts[1] + j) * counts[0] + i; }
        std::array<int, 3> unravel(Index flat) const;
        Vec3 position(int i, int j, int l) const;
        Vec3 position(Index flat) const;

        // Voxel whose center is nearest to r (clamped to the lattice)
        std::array<int, 3> nearest(const Vec3 &r) const;

        bool same_geometry(const VoxelGrid &other, double tol = 1e-12) const;
        void validate() const;
    };

    struct ImageVolume
    {
        VoxelGrid grid;
        CField values;                   // 3 x n_voxels
        std::optional<double> frequency; // Hz for a single-frequency image, empty for a fused image

        Eigen::VectorXd magnitudes() const { return values.colwise().norm().transpose(); }
        bool is_fused() const { return !frequency.has_value(); }
    };

    // Windowed disaggregation of a region spectrum onto the voxels:
    //     J(r') = sum_q w_q F(k_q . k_c) s_q exp(-j k k_q . (r' - c)),
    // with r' - c measured from the region center c. The center phase exp(+j k k_q . c) is therefore
    // part of the stored spectrum, and an image of a point current at r_s peaks at r' = r_s with the
    // phase of the current. An all-zero window yields a zero image and a warning.
    ImageVolume generate_image(const PlaneWaveSpectrum &spectrum, const VoxelGrid &voxels, const SpectralWindow &window);

    struct CorrectionModel
    {
        Vec3 tx_position = Vec3::Zero();
        Vec3 ref_position = Vec3::UnitX();
        bool psi_s = true;   // exp(+j k |r' - r0|), removes the incident propagation phase
        bool psi_ref = true; // exp(-j k |r_ref - r0|), removes the reference-channel phase
        bool m_s = true;     // 4 pi |r' - r0|, removes the incident spherical spreading

        void validate() const;
    };

    // Product of the enabled factors at voxel r' and wavenumber k (1 when all are disabled)
    // - Throws ErrorKind::singularity for r' == r0 with psi_s or m_s enabled
    cplx corrections(double k, const Vec3 &r, const CorrectionModel &model);

    enum class FusionMode
    {
        coherent,  // sum_f psi_s psi_ref M_s J_f
        incoherent // sum_f M_s |J_f| per vector component
    };

    const char *fusion_mode_name(FusionMode mode);
    FusionMode parse_fusion_mode(const std::string &name);

    // Fuses single-frequency images (summed in ascending frequency order)
    // - Throws ErrorKind::incompatible if the voxel geometries differ or an image lacks a frequency tag
    ImageVolume combine_frequencies(std::span<const ImageVolume> images, const CorrectionModel &model, FusionMode mode);

    // Maximum intensity projection of the voxel vector magnitude along one axis of the lattice.
    // For axis z the map is indexed (i, j); for y (i, l); for x (j, l).
    struct MipMap
    {
        Component axis = Component::z;
        Eigen::ArrayXXd magnitude; // normalized so that the peak is 1 (all zero for an empty volume)
        double peak = 0.0;         // linear peak before normalization

        // 20 log10(magnitude), peak at 0 dB; zero pixels are clamped to floor_db
        Eigen::ArrayXXd db(double floor_db = -300.0) const;
    };

    MipMap mip_project(const ImageVolume &volume, Component axis);

    // ---- image metrics ----

    // 20 log10(peak / max magnitude outside guard spheres around every true scatterer)
    // - Throws ErrorKind::metric for an all-zero volume or when no voxel lies outside the guard spheres
    double peak_to_artifact_db(const ImageVolume &volume, const std::vector<Vec3> &true_positions, double guard_radius);

    struct PeakLocation
    {
        std::array<int, 3> voxel{0, 0, 0};
        Vec3 position = Vec3::Zero();
        double magnitude = 0.0;
    };

    // Global maximum of the voxel magnitude; ErrorKind::metric for an empty or all-zero volume
    PeakLocation peak_location(const ImageVolume &volume);

    // Circular statistics of a set of phases
    double circular_std(std::span<const double> phases);      // sqrt(-2 ln R)
    double circular_variance(std::span<const double> phases); // 1 - R

    // Phases of the (optionally corrected) single-frequency images at one voxel. The complex value
    // per image is the projection of the voxel vector onto the dominant polarization, the component
    // with the largest summed magnitude over all images.
    std::vector<double> corrected_phases(std::span<const ImageVolume> images, const CorrectionModel &model, Index voxel);

    // circular_std(corrected_phases(...))
    double phase_flatness(std::span<const ImageVolume> images, const CorrectionModel &model, Index voxel);
}

#endif // NFISR_IMAGING_HPP
