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

#ifndef NFISR_EM_FORWARD_HPP
#define NFISR_EM_FORWARD_HPP

#include "nfisr/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

// Synthetic near-field measurements: a Hertzian-dipole transmitter, Born scattering from isotropic
// point scatterers, a fixed reference antenna and per-capture modulation coefficients.
//
// Time convention is exp(+j*2*pi*f*t), so outgoing waves carry exp(-j*k*R). Physical prefactors
// (-j*omega*mu, eta) are absorbed: a dipole of moment p radiates E = G(r, r0) * p with the dyadic
// G = (I + grad grad / k^2) exp(-j*k*R) / (4*pi*R).

namespace nfisr
{
    struct Scatterer
    {
        Vec3 position = Vec3::Zero();
        cplx reflectivity{1.0, 0.0}; // isotropic scattering dyad sigma * I
    };

    // Planar probe raster. Probe m = i_v * n_u + i_u sits at origin + i_u*du*u_axis + i_v*dv*v_axis.
    struct ScanGrid
    {
        Vec3 origin = Vec3::Zero();
        Vec3 u_axis = Vec3::UnitX();
        Vec3 v_axis = Vec3::UnitY();
        int n_u = 1;
        int n_v = 1;
        double du = 1.0;
        double dv = 1.0;
        std::vector<Component> components{Component::x, Component::y};

        // n_u x n_v raster spanning [center - width/2, center + width/2] along x and y
        static ScanGrid xy_plane(const Vec3 &center, double width_x, double width_y, int n_x, int n_y,
                                 std::vector<Component> components = {Component::x, Component::y});

        Index size() const { return Index(n_u) * n_v; }
        Points positions() const;
        void validate() const;
    };

    struct Scenario
    {
        Vec3 tx_position = Vec3::Zero();
        Vec3 tx_polarization = Vec3::UnitY();
        Vec3 ref_position = Vec3::UnitX();
        Component ref_component = Component::y;
        std::vector<Scatterer> scatterers;
        ScanGrid scan;
        std::vector<double> frequencies; // Hz, strictly increasing
        std::uint64_t rng_seed = 0;

        void validate() const;
    };

    // exp(-j*k*R) / (4*pi*R); ErrorKind::singularity for R == 0
    cplx scalar_green(double k, const Vec3 &r, const Vec3 &r_source);

    // (I + grad grad / k^2) g(r, r_source) in closed form
    CMat3 dyadic_green(double k, const Vec3 &r, const Vec3 &r_source);

    // Field at r of a Hertzian dipole of (complex) moment p located at r0
    CVec3 dipole_field(double k, const Vec3 &r0, const CVec3 &p, const Vec3 &r);
    template <typename Derived>
    CVec3 dipole_field(double k, const Vec3 &r0, const Eigen::MatrixBase<Derived> &p, const Vec3 &r)
    {
        return dipole_field(k, r0, CVec3(p.template cast<cplx>()), r);
    }

    struct BornFields
    {
        CField incident;   // 3 x M at the probes
        CField scattered;  // 3 x M at the probes
        CVec3 ref_incident = CVec3::Zero();
        CVec3 ref_scattered = CVec3::Zero();

        CField total() const { return incident + scattered; }
        CVec3 ref_total() const { return ref_incident + ref_scattered; }
    };

    // Single-pass Born fields at frequency f. Each scatterer carries the induced moment
    // sigma * E_inc(r_s) and radiates through the same dipole kernel; no multiple scattering.
    BornFields born_fields(const Scenario &scenario, double frequency_hz);

    // Per-capture complex coefficients B_m(f), stored M x F
    struct ModulationModel
    {
        Eigen::MatrixXcd coefficients;

        static ModulationModel identity(Index n_probes, Index n_frequencies);

        // |B| in dB uniform in [-spread_db, spread_db], phase uniform in [0, 2*pi). All draws happen
        // up front from the "modulation" substream of the seed; `capture` separates independent
        // acquisitions (e.g. target and background) under one seed.
        static ModulationModel random(Index n_probes, Index n_frequencies, double spread_db, std::uint64_t seed,
                                      std::uint64_t capture = 0);
    };

    // Complex samples indexed (probe m, frequency f, component c) plus the co-recorded reference channel
    struct FieldDataset
    {
        std::vector<double> frequencies;     // Hz
        Points probe_positions;              // 3 x M
        std::vector<Component> components;   // recorded probe components, in storage order
        Component ref_component = Component::y;
        std::vector<Eigen::MatrixXcd> probe; // one M x C block per frequency
        Eigen::MatrixXcd ref;                // M x F
        bool normalized = false;
        bool background_subtracted = false;
        std::string scenario_echo;           // JSON text of the generating scenario, may be empty

        Index n_probes() const { return probe_positions.cols(); }
        Index n_frequencies() const { return Index(frequencies.size()); }
        Index n_components() const { return Index(components.size()); }

        cplx &at(Index m, Index f, Index c) { return probe[std::size_t(f)](m, c); }
        const cplx &at(Index m, Index f, Index c) const { return probe[std::size_t(f)](m, c); }

        // Storage slot of a Cartesian component, or -1 when not recorded
        int slot_of(Component c) const;

        // Shape and finiteness checks; also the normalization-flag / unit-reference convention
        void validate() const;
    };

    // Modulated measurement: probe = B_m(f) * (E_inc + E_sca)(r_m), ref = B_m(f) * (E_inc + E_sca)_p(r_ref).
    // The same coefficient multiplies probe and reference of one capture.
    // - Throws ErrorKind::degenerate_reference when the reference component vanishes
    FieldDataset synthesize_measurement(const Scenario &scenario, const ModulationModel &modulation);
}

#endif // NFISR_EM_FORWARD_HPP
