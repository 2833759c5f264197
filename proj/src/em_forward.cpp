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

#include "nfisr/em_forward.hpp"
#include "nfisr/parallel.hpp"
#include "nfisr/random.hpp"

#include <cmath>

namespace nfisr
{
    namespace
    {
        constexpr double min_separation = 1e-6; // m

        std::string format_vec(const Vec3 &v)
        {
            return "(" + std::to_string(v.x()) + ", " + std::to_string(v.y()) + ", " + std::to_string(v.z()) + ")";
        }
    }

    ScanGrid ScanGrid::xy_plane(const Vec3 &center, double width_x, double width_y, int n_x, int n_y,
                                std::vector<Component> components)
    {
        ScanGrid g;
        g.n_u = n_x;
        g.n_v = n_y;
        g.du = n_x > 1 ? width_x / (n_x - 1) : 1.0;
        g.dv = n_y > 1 ? width_y / (n_y - 1) : 1.0;
        g.origin = center - Vec3(n_x > 1 ? 0.5 * width_x : 0.0, n_y > 1 ? 0.5 * width_y : 0.0, 0.0);
        g.components = std::move(components);
        return g;
    }

    Points ScanGrid::positions() const
    {
        Points p(3, size());
        for (int iv = 0; iv < n_v; ++iv)
            for (int iu = 0; iu < n_u; ++iu)
                p.col(Index(iv) * n_u + iu) = origin + (iu * du) * u_axis + (iv * dv) * v_axis;
        return p;
    }

    void ScanGrid::validate() const
    {
        if (n_u < 1 || n_v < 1)
            throw Error(ErrorKind::config, "scan grid needs at least one probe per axis");
        if (!(du > 0.0) || !(dv > 0.0))
            throw Error(ErrorKind::config, "scan grid spacing must be positive");
        if (std::abs(u_axis.norm() - 1.0) > 1e-12 || std::abs(v_axis.norm() - 1.0) > 1e-12)
            throw Error(ErrorKind::config, "scan grid axes must be unit vectors");
        if (std::abs(u_axis.dot(v_axis)) > 1e-12)
            throw Error(ErrorKind::config, "scan grid axes must be orthogonal");
        if (components.empty())
            throw Error(ErrorKind::config, "scan grid records no field component");
        if (!origin.allFinite())
            throw Error(ErrorKind::config, "scan grid origin is not finite");
    }

    void Scenario::validate() const
    {
        scan.validate();
        if (std::abs(tx_polarization.norm() - 1.0) > 1e-12)
            throw Error(ErrorKind::config, "tx polarization must have unit norm");
        if (!tx_position.allFinite() || !ref_position.allFinite())
            throw Error(ErrorKind::config, "tx/reference positions must be finite");
        if ((ref_position - tx_position).norm() <= min_separation)
            throw Error(ErrorKind::config, "reference antenna coincides with the transmitter");
        const Points probes = scan.positions();
        for (Index m = 0; m < probes.cols(); ++m)
            if ((probes.col(m) - ref_position).norm() <= min_separation)
                throw Error(ErrorKind::config, "reference antenna coincides with probe " + std::to_string(m));
        if (frequencies.empty())
            throw Error(ErrorKind::config, "scenario has no frequencies");
        for (std::size_t i = 0; i < frequencies.size(); ++i)
        {
            if (!(frequencies[i] > 0.0) || !std::isfinite(frequencies[i]))
                throw Error(ErrorKind::config, "frequencies must be positive and finite");
            if (i > 0 && !(frequencies[i] > frequencies[i - 1]))
                throw Error(ErrorKind::config, "frequencies must be strictly increasing");
        }
        for (const auto &s : scatterers)
            if (!s.position.allFinite() || !std::isfinite(s.reflectivity.real()) || !std::isfinite(s.reflectivity.imag()))
                throw Error(ErrorKind::config, "scatterer position and reflectivity must be finite");
    }

    cplx scalar_green(double k, const Vec3 &r, const Vec3 &r_source)
    {
        const double R = (r - r_source).norm();
        if (!(R > 0.0))
            throw Error(ErrorKind::singularity, "scalar_green: coincident points " + format_vec(r));
        return std::exp(-j_unit * (k * R)) / (4.0 * pi * R);
    }

    CMat3 dyadic_green(double k, const Vec3 &r, const Vec3 &r_source)
    {
        const Vec3 d = r - r_source;
        const double R = d.norm();
        if (!(R > 0.0))
            throw Error(ErrorKind::singularity, "dyadic_green: coincident points " + format_vec(r));
        const Vec3 u = d / R;
        const double kr = k * R;
        const cplx g = std::exp(-j_unit * kr) / (4.0 * pi * R);
        const cplx a = 1.0 - j_unit / kr - 1.0 / (kr * kr);
        const cplx b = -1.0 + 3.0 * j_unit / kr + 3.0 / (kr * kr);
        return g * (a * CMat3::Identity() + b * (u * u.transpose()).cast<cplx>());
    }

    CVec3 dipole_field(double k, const Vec3 &r0, const CVec3 &p, const Vec3 &r)
    {
        const Vec3 d = r - r0;
        const double R = d.norm();
        if (!(R > 0.0))
            throw Error(ErrorKind::singularity, "dipole_field: observation point at the dipole " + format_vec(r));
        const Vec3 u = d / R;
        const double kr = k * R;
        const cplx g = std::exp(-j_unit * kr) / (4.0 * pi * R);
        const cplx a = 1.0 - j_unit / kr - 1.0 / (kr * kr);
        const cplx b = -1.0 + 3.0 * j_unit / kr + 3.0 / (kr * kr);
        const cplx up = u.cast<cplx>().dot(p); // dot() conjugates its left operand, u is real
        return g * (a * p + (b * up) * u.cast<cplx>());
    }

    BornFields born_fields(const Scenario &scenario, double frequency_hz)
    {
        if (!(frequency_hz > 0.0))
            throw Error(ErrorKind::domain, "born_fields: frequency must be positive");
        const double k = wavenumber(frequency_hz);
        const Points probes = scenario.scan.positions();
        const Vec3 &r0 = scenario.tx_position;
        const Vec3 &p = scenario.tx_polarization;

        // induced moments sigma * E_inc(r_s)
        std::vector<CVec3> moments;
        moments.reserve(scenario.scatterers.size());
        for (const auto &s : scenario.scatterers)
        {
            if ((s.position - r0).norm() <= min_separation)
                throw Error(ErrorKind::singularity, "scatterer at " + format_vec(s.position) + " coincides with the transmitter");
            moments.push_back(s.reflectivity * dipole_field(k, r0, p, s.position));
        }

        const auto scattered_at = [&](const Vec3 &r)
        {
            CVec3 e = CVec3::Zero();
            for (std::size_t s = 0; s < moments.size(); ++s)
            {
                if ((scenario.scatterers[s].position - r).norm() <= min_separation)
                    throw Error(ErrorKind::singularity, "scatterer at " + format_vec(r) + " coincides with an observation point");
                e += dipole_field(k, scenario.scatterers[s].position, moments[s], r);
            }
            return e;
        };

        BornFields out;
        out.incident.resize(3, probes.cols());
        out.scattered.resize(3, probes.cols());
        parallel_for(0, std::size_t(probes.cols()), [&](std::size_t m)
                     {
            const Vec3 r = probes.col(Index(m));
            out.incident.col(Index(m)) = dipole_field(k, r0, p, r);
            out.scattered.col(Index(m)) = scattered_at(r); });
        out.ref_incident = dipole_field(k, r0, p, scenario.ref_position);
        out.ref_scattered = scattered_at(scenario.ref_position);
        return out;
    }

    ModulationModel ModulationModel::identity(Index n_probes, Index n_frequencies)
    {
        return {Eigen::MatrixXcd::Ones(n_probes, n_frequencies)};
    }

    ModulationModel ModulationModel::random(Index n_probes, Index n_frequencies, double spread_db, std::uint64_t seed,
                                             std::uint64_t capture)
    {
        Rng rng(seed, "modulation", capture);
        ModulationModel model{Eigen::MatrixXcd(n_probes, n_frequencies)};
        for (Index m = 0; m < n_probes; ++m)
            for (Index f = 0; f < n_frequencies; ++f)
            {
                const double level_db = rng.uniform(-spread_db, spread_db);
                const double phase = rng.uniform(0.0, 2.0 * pi);
                model.coefficients(m, f) = std::polar(std::pow(10.0, level_db / 20.0), phase);
            }
        return model;
    }

    int FieldDataset::slot_of(Component c) const
    {
        for (std::size_t i = 0; i < components.size(); ++i)
            if (components[i] == c)
                return int(i);
        return -1;
    }

    void FieldDataset::validate() const
    {
        const Index M = n_probes(), F = n_frequencies(), C = n_components();
        if (Index(probe.size()) != F)
            throw Error(ErrorKind::contract, "dataset: one probe block per frequency expected");
        for (const auto &block : probe)
        {
            if (block.rows() != M || block.cols() != C)
                throw Error(ErrorKind::contract, "dataset: probe block shape mismatch");
            if (!block.allFinite())
                throw Error(ErrorKind::contract, "dataset: non-finite probe sample");
        }
        if (ref.rows() != M || ref.cols() != F)
            throw Error(ErrorKind::contract, "dataset: reference shape mismatch");
        if (!ref.allFinite())
            throw Error(ErrorKind::contract, "dataset: non-finite reference sample");
        const bool unit_ref = (ref.array() == cplx(1.0, 0.0)).all();
        if (normalized != unit_ref)
            throw Error(ErrorKind::contract, normalized ? "dataset: normalized flag set but reference is not identically 1"
                                                        : "dataset: reference identically 1 but normalized flag unset");
    }

    FieldDataset synthesize_measurement(const Scenario &scenario, const ModulationModel &modulation)
    {
        scenario.validate();
        const Index M = scenario.scan.size();
        const Index F = Index(scenario.frequencies.size());
        if (modulation.coefficients.rows() != M || modulation.coefficients.cols() != F)
            throw Error(ErrorKind::config, "modulation model does not cover every (probe, frequency) pair");

        FieldDataset ds;
        ds.frequencies = scenario.frequencies;
        ds.probe_positions = scenario.scan.positions();
        ds.components = scenario.scan.components;
        ds.ref_component = scenario.ref_component;
        ds.ref.resize(M, F);
        ds.probe.reserve(std::size_t(F));

        const int p = index_of(scenario.ref_component);
        for (Index f = 0; f < F; ++f)
        {
            const BornFields fields = born_fields(scenario, scenario.frequencies[std::size_t(f)]);
            const CField total = fields.total();
            const cplx ref_total = fields.ref_total()(p);
            Eigen::MatrixXcd block(M, ds.n_components());
            for (Index m = 0; m < M; ++m)
            {
                const cplx b = modulation.coefficients(m, f);
                for (Index c = 0; c < ds.n_components(); ++c)
                    block(m, c) = b * total(index_of(ds.components[std::size_t(c)]), m);
                ds.ref(m, f) = b * ref_total;
                if (std::abs(ds.ref(m, f)) == 0.0)
                    throw Error(ErrorKind::degenerate_reference,
                                "reference component is zero at probe " + std::to_string(m) + ", frequency index " + std::to_string(f));
            }
            ds.probe.push_back(std::move(block));
        }
        return ds;
    }
}
