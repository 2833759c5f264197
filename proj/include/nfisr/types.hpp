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

#ifndef NFISR_TYPES_HPP
#define NFISR_TYPES_HPP

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nfisr
{
    using cplx = std::complex<double>;

    using Vec3 = Eigen::Vector3d;
    using CVec3 = Eigen::Vector3cd;
    using Mat3 = Eigen::Matrix3d;
    using CMat3 = Eigen::Matrix3cd;
    using Points = Eigen::Matrix3Xd;   // one position per column
    using CField = Eigen::Matrix3Xcd;  // one complex 3-vector per column
    using Index = Eigen::Index;

    inline constexpr double pi = std::numbers::pi;
    inline constexpr double speed_of_light = 299792458.0; // m/s
    inline constexpr cplx j_unit{0.0, 1.0};

    inline double wavenumber(double frequency_hz) { return 2.0 * pi * frequency_hz / speed_of_light; }
    inline double wavelength(double frequency_hz) { return speed_of_light / frequency_hz; }

    // Cartesian vector component selector (x = 0, y = 1, z = 2)
    enum class Component : int
    {
        x = 0,
        y = 1,
        z = 2
    };

    inline int index_of(Component c) { return static_cast<int>(c); }
    char component_name(Component c);
    Component parse_component(const std::string &name);

    enum class ErrorKind
    {
        domain,               // argument outside the function domain
        overflow,             // result magnitude beyond representable range
        singularity,          // coincident points in a Green's function or correction
        config,               // malformed or inconsistent configuration
        degenerate_reference, // reference channel too weak to normalize by
        framing,              // I/Q length not a whole number of OFDM symbols
        undefined_harmonic,   // subcarrier without pilot energy
        singular_translation, // zero translation vector
        validity,             // probe inside a source region sphere
        contract,             // operation called on data in the wrong state
        incompatible,         // datasets or volumes that cannot be combined
        metric,               // image metric on empty input
        io                    // file format or filesystem failure
    };

    const char *error_kind_name(ErrorKind kind);

    // Non-fatal diagnostics go to stderr
    void warn(const std::string &message);

    class Error : public std::runtime_error
    {
    public:
        Error(ErrorKind kind, const std::string &what)
            : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind) {}

        ErrorKind kind() const noexcept { return kind_; }

    private:
        ErrorKind kind_;
    };
}

#endif // NFISR_TYPES_HPP
