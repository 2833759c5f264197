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

#ifndef NFISR_IO_HPP
#define NFISR_IO_HPP

#include "nfisr/em_forward.hpp"
#include "nfisr/imaging.hpp"
#include "nfisr/pws.hpp"

#include <filesystem>
#include <string>
#include <vector>

// Binary containers, all little-endian with a 4-byte magic and a u32 version:
//
//   NFD1  u64 M, u64 F, u32 C, u32 flags (1 normalized, 2 background subtracted), u32 reference component,
//         C x u32 component codes, F x f64 frequencies (Hz), 3M x f64 probe positions (m),
//         probe payload (f, m, c) and reference payload (f, m) as interleaved f64 re/im pairs
//   PWS1  u32 n_spectra, f64 frequency, u64 Q, u32 band limit, u32 n_theta, u32 n_phi,
//         3Q x f64 directions, Q x f64 weights, then per spectrum: 3 x f64 center, f64 radius,
//         u32 role, i32 order, 3Q complex samples
//   IMG1  u32 flags (1 frequency present), f64 frequency, 3 x f64 origin, 9 x f64 axes (column major),
//         3 x u32 counts, 3 x f64 spacing, 3N complex voxel values
//
// Every container is accompanied by a JSON sidecar <file>.json describing the layout.

namespace nfisr
{
    inline constexpr std::uint32_t container_version = 1;

    void write_dataset(const FieldDataset &ds, const std::filesystem::path &path);
    FieldDataset read_dataset(const std::filesystem::path &path);

    // All spectra must share frequency and quadrature grid
    void write_spectra(const std::vector<PlaneWaveSpectrum> &spectra, const std::filesystem::path &path);
    std::vector<PlaneWaveSpectrum> read_spectra(const std::filesystem::path &path);

    void write_image(const ImageVolume &volume, const std::filesystem::path &path);
    ImageVolume read_image(const std::filesystem::path &path);

    // 16-bit binary PGM (P5, big-endian samples, maxval 65535) of the dB map, rows ordered by the
    // second map index, columns by the first. pixel = round(65535 * (dB - floor_db) / -floor_db),
    // clamped to [0, 65535]. A sidecar <file>.json records the scaling.
    void write_mip_pgm(const MipMap &mip, const std::filesystem::path &path, double floor_db = -40.0);

    // Same layout as the PGM, dB values with the peak at 0 and zero pixels at floor_db
    void write_mip_csv(const MipMap &mip, const std::filesystem::path &path, double floor_db = -40.0);

    std::filesystem::path sidecar_path(const std::filesystem::path &path);

    // Lower-case hex SHA-256 of a file's content
    std::string sha256_file(const std::filesystem::path &path);
}

#endif // NFISR_IO_HPP
