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

#include "nfisr/imaging.hpp"
#include "nfisr/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nfisr
{
    void SpectralWindow::validate() const
    {
        if (std::abs(center_direction.norm() - 1.0) > 1e-9)
            throw Error(ErrorKind::config, "window center direction must be a unit vector");
        if (!(cutoff > 0.0 && cutoff <= pi))
            throw Error(ErrorKind::config, "window cutoff angle must lie in (0, pi]");
        if (!(taper >= 0.0 && taper <= 1.0))
            throw Error(ErrorKind::config, "window taper fraction must lie in [0, 1]");
    }

    double spectral_window(const Vec3 &k_hat, const SpectralWindow &window)
    {
        const double gamma = std::acos(std::clamp(k_hat.dot(window.center_direction), -1.0, 1.0));
        const double flat = (1.0 - window.taper) * window.cutoff;
        if (gamma <= flat)
            return 1.0;
        if (gamma > window.cutoff)
            return 0.0;
        const double t = (gamma - flat) / (window.cutoff - flat);
        return 0.5 * (1.0 + std::cos(pi * t));
    }

    VoxelGrid VoxelGrid::box(const Vec3 &lo, const Vec3 &hi, double spacing)
    {
        if (!(spacing > 0.0))
            throw Error(ErrorKind::config, "voxel spacing must be positive");
        VoxelGrid g;
        g.origin = lo;
        g.spacing = Vec3::Constant(spacing);
        for (int a = 0; a < 3; ++a)
            g.counts[std::size_t(a)] = std::max(1, int(std::floor((hi[a] - lo[a]) / spacing + 1e-9)) + 1);
        return g;
    }

    std::array<int, 3> VoxelGrid::unravel(Index flat) const
    {
        const int i = int(flat % counts[0]);
        const Index rest = flat / counts[0];
        return {i, int(rest % counts[1]), int(rest / counts[1])};
    }

    Vec3 VoxelGrid::position(int i, int j, int l) const
    {
        return origin + axes.col(0) * (i * spacing[0]) + axes.col(1) * (j * spacing[1]) + axes.col(2) * (l * spacing[2]);
    }

    Vec3 VoxelGrid::position(Index flat) const
    {
        const auto [i, j, l] = unravel(flat);
        return position(i, j, l);
    }

    std::array<int, 3> VoxelGrid::nearest(const Vec3 &r) const
    {
        const Vec3 local = axes.transpose() * (r - origin);
        std::array<int, 3> v{};
        for (int a = 0; a < 3; ++a)
            v[std::size_t(a)] = std::clamp(int(std::lround(local[a] / spacing[a])), 0, counts[std::size_t(a)] - 1);
        return v;
    }

    bool VoxelGrid::same_geometry(const VoxelGrid &other, double tol) const
    {
        return counts == other.counts && (origin - other.origin).cwiseAbs().maxCoeff() <= tol &&
               (axes - other.axes).cwiseAbs().maxCoeff() <= tol && (spacing - other.spacing).cwiseAbs().maxCoeff() <= tol;
    }

    void VoxelGrid::validate() const
    {
        for (int c : counts)
            if (c < 1)
                throw Error(ErrorKind::config, "voxel counts must be at least 1");
        if (!(spacing.minCoeff() > 0.0))
            throw Error(ErrorKind::config, "voxel spacing must be positive");
        if ((axes.transpose() * axes - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
            throw Error(ErrorKind::config, "voxel axes must be orthonormal");
        if (!origin.allFinite())
            throw Error(ErrorKind::config, "voxel origin must be finite");
    }

    ImageVolume generate_image(const PlaneWaveSpectrum &spectrum, const VoxelGrid &voxels, const SpectralWindow &window)
    {
        spectrum.validate();
        voxels.validate();
        window.validate();

        const QuadratureGrid &grid = *spectrum.grid;
        const double k = wavenumber(spectrum.frequency);
        const auto [nx, ny, nz] = voxels.counts;

        ImageVolume image;
        image.grid = voxels;
        image.frequency = spectrum.frequency;
        image.values = CField::Zero(3, voxels.size());

        // weighted spectrum w_q F_q s_q; directions with zero window weight are dropped
        std::vector<Index> active;
        CField weighted(3, grid.size());
        for (Index q = 0; q < grid.size(); ++q)
        {
            const double f = spectral_window(grid.directions.col(q), window);
            weighted.col(q) = (grid.weights[q] * f) * spectrum.samples.col(q);
            if (f > 0.0)
                active.push_back(q);
        }
        if (active.empty())
        {
            warn("generate_image: spectral window removes every quadrature direction, image is zero");
            return image;
        }

        const Vec3 base = voxels.origin - spectrum.region.center;
        // exp(-j k k_q . (r' - c)) factorizes over the three lattice axes
        parallel_for(0, std::size_t(nz), [&](std::size_t l_index)
                     {
            const int l = int(l_index);
            std::vector<cplx> ex(static_cast<std::size_t>(nx)), ey(static_cast<std::size_t>(ny));
            for (Index q : active)
            {
                const Vec3 u = grid.directions.col(q);
                const double phase0 = -k * u.dot(base + voxels.axes.col(2) * (l * voxels.spacing[2]));
                const cplx step_x = std::exp(-j_unit * (k * voxels.spacing[0] * u.dot(voxels.axes.col(0))));
                const cplx step_y = std::exp(-j_unit * (k * voxels.spacing[1] * u.dot(voxels.axes.col(1))));
                cplx e(1.0, 0.0);
                for (int i = 0; i < nx; ++i)
                {
                    ex[std::size_t(i)] = e;
                    e *= step_x;
                }
                e = std::exp(j_unit * phase0);
                for (int j = 0; j < ny; ++j)
                {
                    ey[std::size_t(j)] = e;
                    e *= step_y;
                }
                const CVec3 a = weighted.col(q);
                for (int j = 0; j < ny; ++j)
                {
                    const CVec3 aj = a * ey[std::size_t(j)];
                    const Index row = voxels.index(0, j, l);
                    for (int i = 0; i < nx; ++i)
                        image.values.col(row + i) += aj * ex[std::size_t(i)];
                }
            } });
        return image;
    }

    void CorrectionModel::validate() const
    {
        if (!tx_position.allFinite() || !ref_position.allFinite())
            throw Error(ErrorKind::config, "correction positions must be finite");
        if (psi_ref && (ref_position - tx_position).norm() <= 0.0)
            throw Error(ErrorKind::config, "reference position coincides with the transmitter");
    }

    cplx corrections(double k, const Vec3 &r, const CorrectionModel &model)
    {
        cplx c(1.0, 0.0);
        if (model.psi_s || model.m_s)
        {
            const double d = (r - model.tx_position).norm();
            if (!(d > 0.0))
                throw Error(ErrorKind::singularity, "correction evaluated at the transmitter position");
            if (model.psi_s)
                c *= std::exp(j_unit * (k * d));
            if (model.m_s)
                c *= 4.0 * pi * d;
        }
        if (model.psi_ref)
            c *= std::exp(-j_unit * (k * (model.ref_position - model.tx_position).norm()));
        return c;
    }

    const char *fusion_mode_name(FusionMode mode)
    {
        return mode == FusionMode::coherent ? "coherent" : "incoherent";
    }

    FusionMode parse_fusion_mode(const std::string &name)
    {
        if (name == "coherent")
            return FusionMode::coherent;
        if (name == "incoherent")
            return FusionMode::incoherent;
        throw Error(ErrorKind::config, "unknown fusion mode '" + name + "'");
    }

    ImageVolume combine_frequencies(std::span<const ImageVolume> images, const CorrectionModel &model, FusionMode mode)
    {
        if (images.empty())
            throw Error(ErrorKind::incompatible, "no images to combine");
        std::vector<std::size_t> order(images.size());
        std::iota(order.begin(), order.end(), 0);
        for (const auto &img : images)
        {
            if (!img.frequency)
                throw Error(ErrorKind::incompatible, "fusion input lacks a frequency tag");
            if (!img.grid.same_geometry(images.front().grid))
                throw Error(ErrorKind::incompatible, "fusion inputs have different voxel geometry");
        }
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b)
                         { return *images[a].frequency < *images[b].frequency; });

        const VoxelGrid &voxels = images.front().grid;
        ImageVolume fused;
        fused.grid = voxels;
        fused.values = CField::Zero(3, voxels.size());
        for (std::size_t idx : order)
        {
            const ImageVolume &img = images[idx];
            const double k = wavenumber(*img.frequency);
            for (Index v = 0; v < voxels.size(); ++v)
            {
                if (mode == FusionMode::coherent)
                {
                    fused.values.col(v) += corrections(k, voxels.position(v), model) * img.values.col(v);
                }
                else
                {
                    const double weight = model.m_s ? 4.0 * pi * (voxels.position(v) - model.tx_position).norm() : 1.0;
                    fused.values.col(v) += (weight * img.values.col(v).cwiseAbs()).cast<cplx>();
                }
            }
        }
        return fused;
    }

    Eigen::ArrayXXd MipMap::db(double floor_db) const
    {
        return magnitude.unaryExpr([floor_db](double m)
                                   { return m > 0.0 ? std::max(floor_db, 20.0 * std::log10(m)) : floor_db; });
    }

    MipMap mip_project(const ImageVolume &volume, Component axis)
    {
        const auto [nx, ny, nz] = volume.grid.counts;
        const Eigen::VectorXd mag = volume.magnitudes();
        MipMap map;
        map.axis = axis;
        switch (axis)
        {
        case Component::z: map.magnitude = Eigen::ArrayXXd::Zero(nx, ny); break;
        case Component::y: map.magnitude = Eigen::ArrayXXd::Zero(nx, nz); break;
        case Component::x: map.magnitude = Eigen::ArrayXXd::Zero(ny, nz); break;
        }
        for (int l = 0; l < nz; ++l)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i)
                {
                    const double m = mag[volume.grid.index(i, j, l)];
                    double &px = axis == Component::z ? map.magnitude(i, j) : axis == Component::y ? map.magnitude(i, l) : map.magnitude(j, l);
                    px = std::max(px, m);
                }
        map.peak = map.magnitude.maxCoeff();
        if (map.peak > 0.0)
            map.magnitude /= map.peak;
        return map;
    }

    double peak_to_artifact_db(const ImageVolume &volume, const std::vector<Vec3> &true_positions, double guard_radius)
    {
        if (volume.values.cols() == 0)
            throw Error(ErrorKind::metric, "peak-to-artifact of an empty volume");
        const Eigen::VectorXd mag = volume.magnitudes();
        const double peak = mag.maxCoeff();
        if (!(peak > 0.0))
            throw Error(ErrorKind::metric, "peak-to-artifact of an all-zero volume");
        double artifact = 0.0;
        bool any_outside = false;
        for (Index v = 0; v < mag.size(); ++v)
        {
            const Vec3 r = volume.grid.position(v);
            const bool guarded = std::any_of(true_positions.begin(), true_positions.end(),
                                             [&](const Vec3 &t) { return (r - t).norm() <= guard_radius; });
            if (guarded)
                continue;
            any_outside = true;
            artifact = std::max(artifact, mag[v]);
        }
        if (!any_outside)
            throw Error(ErrorKind::metric, "every voxel lies inside a guard sphere");
        if (artifact == 0.0)
            return std::numeric_limits<double>::infinity();
        return 20.0 * std::log10(peak / artifact);
    }

    PeakLocation peak_location(const ImageVolume &volume)
    {
        if (volume.values.cols() == 0)
            throw Error(ErrorKind::metric, "peak location of an empty volume");
        const Eigen::VectorXd mag = volume.magnitudes();
        Index best = 0;
        const double peak = mag.maxCoeff(&best);
        if (!(peak > 0.0))
            throw Error(ErrorKind::metric, "peak location of an all-zero volume");
        return {volume.grid.unravel(best), volume.grid.position(best), peak};
    }

    double circular_variance(std::span<const double> phases)
    {
        if (phases.empty())
            throw Error(ErrorKind::metric, "circular statistics of an empty set");
        cplx mean(0.0, 0.0);
        for (double p : phases)
            mean += std::polar(1.0, p);
        return 1.0 - std::abs(mean) / double(phases.size());
    }

    double circular_std(std::span<const double> phases)
    {
        const double R = std::min(1.0, 1.0 - circular_variance(phases));
        return R > 0.0 ? std::sqrt(-2.0 * std::log(R)) : std::numeric_limits<double>::infinity();
    }

    std::vector<double> corrected_phases(std::span<const ImageVolume> images, const CorrectionModel &model, Index voxel)
    {
        if (images.empty())
            throw Error(ErrorKind::metric, "phase flatness needs at least one image");
        Eigen::Vector3d summed = Eigen::Vector3d::Zero();
        for (const auto &img : images)
        {
            if (voxel < 0 || voxel >= img.values.cols())
                throw Error(ErrorKind::metric, "voxel index outside the volume");
            summed += img.values.col(voxel).cwiseAbs();
        }
        Index dominant = 0;
        summed.maxCoeff(&dominant);

        std::vector<double> phases;
        phases.reserve(images.size());
        for (const auto &img : images)
        {
            if (!img.frequency)
                throw Error(ErrorKind::metric, "phase flatness needs single-frequency images");
            const cplx c = corrections(wavenumber(*img.frequency), img.grid.position(voxel), model);
            phases.push_back(std::arg(c * img.values(dominant, voxel)));
        }
        return phases;
    }

    double phase_flatness(std::span<const ImageVolume> images, const CorrectionModel &model, Index voxel)
    {
        const std::vector<double> phases = corrected_phases(images, model, voxel);
        return circular_std(phases);
    }
}
