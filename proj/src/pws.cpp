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

#include "nfisr/pws.hpp"
#include "nfisr/parallel.hpp"
#include "nfisr/random.hpp"

namespace nfisr
{
    namespace
    {
        // (-j)^l (2l+1) h_l^(2)(k|X|), split into real and imaginary parts for the direction loop
        void translation_coefficients(int order, double kx, std::vector<double> &re, std::vector<double> &im)
        {
            std::vector<cplx> h(std::size_t(order) + 1);
            sph_hankel2_table(order, kx, h);
            re.resize(h.size());
            im.resize(h.size());
            cplx phase(1.0, 0.0);
            for (int l = 0; l <= order; ++l)
            {
                const cplx c = phase * double(2 * l + 1) * h[std::size_t(l)];
                re[std::size_t(l)] = c.real();
                im[std::size_t(l)] = c.imag();
                phase *= -j_unit;
            }
        }

        // Series evaluation for one direction cosine; P_l runs through the three-term recurrence
        inline cplx sum_series(int order, double x, const double *re, const double *im)
        {
            double p_prev = 1.0, p = x;
            double acc_re = re[0], acc_im = im[0];
            if (order >= 1)
            {
                acc_re += re[1] * x;
                acc_im += im[1] * x;
            }
            for (int l = 1; l < order; ++l)
            {
                const double p_next = ((2 * l + 1) * x * p - l * p_prev) / (l + 1);
                p_prev = p;
                p = p_next;
                acc_re += re[l + 1] * p;
                acc_im += im[l + 1] * p;
            }
            return {acc_re, acc_im};
        }
    }

    const char *role_name(SourceRole role)
    {
        return role == SourceRole::incident ? "incident" : "scattered";
    }

    SourceRole parse_role(const std::string &name)
    {
        if (name == "incident")
            return SourceRole::incident;
        if (name == "scattered")
            return SourceRole::scattered;
        throw Error(ErrorKind::config, "unknown source role '" + name + "'");
    }

    double PlaneWaveSpectrum::transversality_defect() const
    {
        double worst = 0.0;
        for (Index q = 0; q < samples.cols(); ++q)
        {
            const double mag = samples.col(q).norm();
            if (mag == 0.0)
                continue;
            const cplx radial = grid->directions.col(q).cast<cplx>().dot(samples.col(q));
            worst = std::max(worst, std::abs(radial) / mag);
        }
        return worst;
    }

    void PlaneWaveSpectrum::validate() const
    {
        if (!grid)
            throw Error(ErrorKind::contract, "spectrum without quadrature grid");
        if (samples.cols() != grid->size())
            throw Error(ErrorKind::contract, "spectrum sample count does not match its grid");
        if (!samples.allFinite())
            throw Error(ErrorKind::contract, "spectrum has non-finite samples");
        if (transversality_defect() > 1e-9)
            throw Error(ErrorKind::contract, "spectrum is not transverse to its propagation directions");
    }

    int select_order(double k, double diameter, double digits)
    {
        if (!(k > 0.0) || !(diameter > 0.0))
            throw Error(ErrorKind::domain, "select_order: k and diameter must be positive");
        if (!(digits >= 1.0 && digits <= 10.0))
            throw Error(ErrorKind::domain, "select_order: digits must lie in [1, 10]");
        const double half = 0.5 * k * diameter;
        const double L = half + 1.8 * std::pow(digits, 2.0 / 3.0) * std::cbrt(half);
        return std::max(4, int(std::ceil(L)));
    }

    Eigen::VectorXcd translation_operator(int order, double k, const Vec3 &X, const QuadratureGrid &grid)
    {
        const double dist = X.norm();
        if (!(dist > 0.0))
            throw Error(ErrorKind::singular_translation, "translation vector has zero length");
        if (order < 0)
            throw Error(ErrorKind::domain, "translation_operator: negative order");
        std::vector<double> re, im;
        translation_coefficients(order, k * dist, re, im);
        const Vec3 axis = X / dist;
        Eigen::VectorXcd t(grid.size());
        for (Index q = 0; q < grid.size(); ++q)
        {
            const double x = std::clamp(axis.dot(grid.directions.col(q)), -1.0, 1.0);
            t[q] = sum_series(order, x, re.data(), im.data());
        }
        return t;
    }

    GridPtr make_grid(const std::vector<SourceRegion> &regions)
    {
        int band = 1;
        for (const auto &r : regions)
            band = std::max(band, r.order);
        return std::make_shared<const QuadratureGrid>(sphere_quadrature(band));
    }

    CField project_transverse(const QuadratureGrid &grid, const CField &samples)
    {
        CField out(3, samples.cols());
        for (Index q = 0; q < samples.cols(); ++q)
        {
            const Eigen::Vector3cd u = grid.directions.col(q).cast<cplx>();
            const CVec3 s = samples.col(q);
            out.col(q) = s - u * u.dot(s);
        }
        return out;
    }

    CField point_source_spectrum(const QuadratureGrid &grid, double k, const Vec3 &center, const Vec3 &position,
                                 const CVec3 &moment)
    {
        const Vec3 d = position - center;
        CField out(3, grid.size());
        for (Index q = 0; q < grid.size(); ++q)
        {
            const Vec3 u = grid.directions.col(q);
            const CVec3 uc = u.cast<cplx>();
            const CVec3 transverse = moment - uc * uc.dot(moment);
            out.col(q) = (k / (4.0 * pi)) * std::exp(j_unit * (k * u.dot(d))) * transverse;
        }
        return out;
    }

    PlaneWaveOperator::PlaneWaveOperator(std::vector<SourceRegion> regions, GridPtr grid, double frequency_hz, Points probes,
                                         std::vector<Component> components)
        : regions_(std::move(regions)), grid_(std::move(grid)), frequency_(frequency_hz), k_(wavenumber(frequency_hz)),
          probes_(std::move(probes)), components_(std::move(components))
    {
        if (!grid_)
            throw Error(ErrorKind::config, "plane-wave operator needs a quadrature grid");
        if (!(frequency_hz > 0.0))
            throw Error(ErrorKind::domain, "plane-wave operator frequency must be positive");
        if (components_.empty())
            throw Error(ErrorKind::config, "plane-wave operator needs at least one field component");

        const Index M = probes_.cols();
        const Index Q = grid_->size();
        for (std::size_t r = 0; r < regions_.size(); ++r)
        {
            const auto &region = regions_[r];
            if (region.order > grid_->band_limit)
                throw Error(ErrorKind::config, "region order " + std::to_string(region.order) + " exceeds grid band limit " +
                                                   std::to_string(grid_->band_limit));
            if (!(region.radius > 0.0))
                throw Error(ErrorKind::config, "region radius must be positive");
            for (Index m = 0; m < M; ++m)
                if ((probes_.col(m) - region.center).norm() <= region.radius)
                    throw Error(ErrorKind::validity, "probe " + std::to_string(m) + " lies inside region " + std::to_string(r) +
                                                         " (" + role_name(region.role) + ")");
        }

        kernels_.assign(regions_.size(), Eigen::MatrixXcd(M, Q));
        for (std::size_t r = 0; r < regions_.size(); ++r)
        {
            const auto &region = regions_[r];
            auto &kernel = kernels_[r];
            parallel_for(0, std::size_t(M), [&](std::size_t m)
                         {
                std::vector<double> re, im;
                const Vec3 X = probes_.col(Index(m)) - region.center;
                const double dist = X.norm();
                translation_coefficients(region.order, k_ * dist, re, im);
                const Vec3 axis = X / dist;
                for (Index q = 0; q < Q; ++q)
                {
                    const double x = std::clamp(axis.dot(grid_->directions.col(q)), -1.0, 1.0);
                    kernel(Index(m), q) = sum_series(region.order, x, re.data(), im.data());
                } });
        }
    }

    Eigen::MatrixXcd PlaneWaveOperator::apply(const std::vector<CField> &spectra) const
    {
        if (spectra.size() != regions_.size())
            throw Error(ErrorKind::contract, "one spectrum per region expected");
        const Index M = probes_.cols();
        Eigen::MatrixXcd full = Eigen::MatrixXcd::Zero(M, 3);
        for (std::size_t r = 0; r < regions_.size(); ++r)
        {
            if (spectra[r].cols() != grid_->size())
                throw Error(ErrorKind::contract, "spectrum size does not match the operator grid");
            CField weighted = project_transverse(*grid_, spectra[r]);
            weighted *= grid_->weights.asDiagonal();
            full.noalias() += kernels_[r] * weighted.transpose();
        }
        full *= -j_unit / (4.0 * pi);

        Eigen::MatrixXcd out(M, n_components());
        for (Index c = 0; c < n_components(); ++c)
            out.col(c) = full.col(index_of(components_[std::size_t(c)]));
        return out;
    }

    std::vector<CField> PlaneWaveOperator::adjoint(const Eigen::MatrixXcd &residual) const
    {
        if (residual.rows() != n_probes() || residual.cols() != n_components())
            throw Error(ErrorKind::contract, "residual shape does not match the operator");
        Eigen::MatrixXcd full = Eigen::MatrixXcd::Zero(n_probes(), 3);
        for (Index c = 0; c < n_components(); ++c)
            full.col(index_of(components_[std::size_t(c)])) += residual.col(c);

        std::vector<CField> out;
        out.reserve(regions_.size());
        for (std::size_t r = 0; r < regions_.size(); ++r)
        {
            Eigen::MatrixXcd back = kernels_[r].adjoint() * full; // Q x 3
            CField s = back.transpose() * (j_unit / (4.0 * pi));
            out.push_back(project_transverse(*grid_, s));
        }
        return out;
    }

    cplx PlaneWaveOperator::dot(const std::vector<CField> &a, const std::vector<CField> &b) const
    {
        cplx acc(0.0, 0.0);
        for (std::size_t r = 0; r < a.size(); ++r)
            acc += ((a[r].conjugate().cwiseProduct(b[r])).colwise().sum() * grid_->weights.cast<cplx>()).value();
        return acc;
    }

    std::vector<CField> PlaneWaveOperator::zero_spectra() const
    {
        return std::vector<CField>(regions_.size(), CField::Zero(3, grid_->size()));
    }

    double PlaneWaveOperator::adjoint_defect(std::uint64_t seed) const
    {
        Rng rng(seed, "adjoint-check");
        std::vector<CField> x = zero_spectra();
        for (auto &block : x)
            for (Index i = 0; i < block.size(); ++i)
                block.data()[i] = rng.complex_normal();
        for (auto &block : x)
            block = project_transverse(*grid_, block);
        Eigen::MatrixXcd y(n_probes(), n_components());
        for (Index i = 0; i < y.size(); ++i)
            y.data()[i] = rng.complex_normal();

        const Eigen::MatrixXcd ax = apply(x);
        const cplx lhs = (ax.conjugate().cwiseProduct(y)).sum();
        const cplx rhs = dot(x, adjoint(y));
        const double scale = ax.norm() * y.norm();
        return scale > 0.0 ? std::abs(lhs - rhs) / scale : std::abs(lhs - rhs);
    }

    Eigen::MatrixXcd forward_field(const std::vector<PlaneWaveSpectrum> &spectra, const Points &probes,
                                   const std::vector<Component> &components)
    {
        if (spectra.empty())
            return Eigen::MatrixXcd::Zero(probes.cols(), Index(components.size()));
        const GridPtr grid = spectra.front().grid;
        const double frequency = spectra.front().frequency;
        std::vector<SourceRegion> regions;
        std::vector<CField> samples;
        for (const auto &s : spectra)
        {
            if (s.grid != grid && (s.grid->band_limit != grid->band_limit))
                throw Error(ErrorKind::contract, "forward_field: spectra must share one quadrature grid");
            if (s.frequency != frequency)
                throw Error(ErrorKind::contract, "forward_field: spectra must share one frequency");
            regions.push_back(s.region);
            samples.push_back(s.samples);
        }
        const PlaneWaveOperator op(std::move(regions), grid, frequency, probes, components);
        return op.apply(samples);
    }

    std::vector<PlaneWaveSpectrum> adjoint_field(const Eigen::MatrixXcd &residual, const std::vector<SourceRegion> &regions,
                                                 const GridPtr &grid, double frequency_hz, const Points &probes,
                                                 const std::vector<Component> &components)
    {
        const PlaneWaveOperator op(regions, grid, frequency_hz, probes, components);
        std::vector<CField> blocks = op.adjoint(residual);
        std::vector<PlaneWaveSpectrum> out;
        for (std::size_t r = 0; r < regions.size(); ++r)
            out.push_back({regions[r], frequency_hz, grid, std::move(blocks[r])});
        return out;
    }
}
