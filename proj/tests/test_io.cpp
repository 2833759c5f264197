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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "json.hpp"

#include "nfisr/io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <unistd.h>

using namespace nfisr;
namespace fs = std::filesystem;

namespace
{
    struct TempDir
    {
        fs::path path;
        TempDir()
        {
            path = fs::temp_directory_path() / ("nfisr_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
            fs::create_directories(path);
        }
        ~TempDir() { fs::remove_all(path); }
        static int &counter()
        {
            static int c = 0;
            return c;
        }
    };

    std::string slurp(const fs::path &p)
    {
        std::ifstream is(p, std::ios::binary);
        return {std::istreambuf_iterator<char>(is), {}};
    }

    void spit(const fs::path &p, const std::string &bytes)
    {
        std::ofstream os(p, std::ios::binary);
        os << bytes;
    }

    template <typename F>
    ErrorKind kind_of(F &&f)
    {
        try
        {
            f();
        }
        catch (const Error &e)
        {
            return e.kind();
        }
        FAIL("no exception");
        return ErrorKind::config;
    }

    FieldDataset sample_dataset()
    {
        Scenario s;
        s.tx_position = Vec3(0, 0, 0.5);
        s.ref_position = Vec3(-0.5, 0, 0.8);
        s.scatterers = {{Vec3(0.01, 0, 0), 1.0}};
        s.scan = ScanGrid::xy_plane(Vec3(0, 0, 1), 0.5, 0.4, 5, 4);
        s.frequencies = {6e9, 7e9, 8e9};
        FieldDataset ds = synthesize_measurement(s, ModulationModel::random(20, 3, 20.0, 9));
        ds.scenario_echo = R"({"note":"echo"})";
        return ds;
    }
}

TEST_CASE("dataset round trip")
{
    TempDir dir;
    const FieldDataset ds = sample_dataset();
    const fs::path p = dir.path / "d.nfd";
    write_dataset(ds, p);
    const FieldDataset back = read_dataset(p);
    CHECK(back.frequencies == ds.frequencies);
    CHECK(back.probe_positions == ds.probe_positions);
    CHECK(back.components == ds.components);
    CHECK(back.ref_component == ds.ref_component);
    CHECK(back.ref == ds.ref);
    for (std::size_t f = 0; f < 3; ++f)
        CHECK(back.probe[f] == ds.probe[f]);
    CHECK(back.normalized == ds.normalized);
    CHECK(back.background_subtracted == ds.background_subtracted);
    CHECK(slurp(p).substr(0, 4) == "NFD1");
    // payload size pinned by the layout
    const std::size_t M = 20, F = 3, C = 2;
    const std::size_t header = 4 + 4 + 8 + 8 + 4 + 4 + 4 + 4 * C + 8 * F + 24 * M;
    CHECK(fs::file_size(p) == header + 16 * (F * M * C + F * M));

    const auto side = nlohmann::json::parse(slurp(sidecar_path(p)));
    CHECK(side.contains("scenario"));
    CHECK(sidecar_path(p).filename() == "d.nfd.json");
}

TEST_CASE("dataset payload ordering")
{
    TempDir dir;
    FieldDataset ds = sample_dataset();
    ds.at(3, 2, 1) = cplx(1234.5, -6.75);
    const fs::path p = dir.path / "d.nfd";
    write_dataset(ds, p);
    const std::string bytes = slurp(p);
    const std::size_t M = 20, C = 2;
    const std::size_t header = 4 + 4 + 8 + 8 + 4 + 4 + 4 + 4 * C + 8 * 3 + 24 * M;
    double re = 0.0, im = 0.0;
    const std::size_t off = header + 16 * ((2 * M + 3) * C + 1);
    std::memcpy(&re, bytes.data() + off, 8);
    std::memcpy(&im, bytes.data() + off + 8, 8);
    CHECK(re == 1234.5);
    CHECK(im == -6.75);
}

TEST_CASE("corrupted containers are rejected")
{
    TempDir dir;
    const fs::path p = dir.path / "d.nfd";
    write_dataset(sample_dataset(), p);
    std::string bytes = slurp(p);

    std::string bad = bytes;
    bad[0] = 'X';
    spit(dir.path / "magic.nfd", bad);
    CHECK(kind_of([&] { read_dataset(dir.path / "magic.nfd"); }) == ErrorKind::io);

    bad = bytes;
    bad[4] = 9;
    spit(dir.path / "version.nfd", bad);
    CHECK(kind_of([&] { read_dataset(dir.path / "version.nfd"); }) == ErrorKind::io);

    spit(dir.path / "short.nfd", bytes.substr(0, bytes.size() - 5));
    CHECK(kind_of([&] { read_dataset(dir.path / "short.nfd"); }) == ErrorKind::io);

    spit(dir.path / "long.nfd", bytes + "x");
    CHECK(kind_of([&] { read_dataset(dir.path / "long.nfd"); }) == ErrorKind::io);

    CHECK(kind_of([&] { read_dataset(dir.path / "missing.nfd"); }) == ErrorKind::io);
    CHECK(kind_of([&] { read_image(p); }) == ErrorKind::io);
    CHECK(kind_of([&] { read_spectra(p); }) == ErrorKind::io);
}

TEST_CASE("spectra round trip")
{
    TempDir dir;
    const double f = 8e9, k = wavenumber(f);
    const std::vector<SourceRegion> regions{{Vec3::Zero(), 0.05, SourceRole::scattered, 0},
                                            {Vec3(0, 0, 0.5), 0.02, SourceRole::incident, 4}};
    const auto resolved = std::vector<SourceRegion>{{Vec3::Zero(), 0.05, SourceRole::scattered, select_order(k, 0.1, 3)},
                                                    regions[1]};
    const GridPtr grid = make_grid(resolved);
    std::vector<PlaneWaveSpectrum> spectra;
    for (const auto &r : resolved)
        spectra.push_back({r, f, grid, point_source_spectrum(*grid, k, r.center, r.center, CVec3(0, 1, 0))});
    const fs::path p = dir.path / "s.pws";
    write_spectra(spectra, p);
    CHECK(slurp(p).substr(0, 4) == "PWS1");
    const auto back = read_spectra(p);
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i)
    {
        CHECK(back[i].frequency == f);
        CHECK(back[i].region.center == spectra[i].region.center);
        CHECK(back[i].region.radius == spectra[i].region.radius);
        CHECK(back[i].region.role == spectra[i].region.role);
        CHECK(back[i].region.order == spectra[i].region.order);
        CHECK(back[i].samples == spectra[i].samples);
        CHECK(back[i].grid->directions == grid->directions);
        CHECK(back[i].grid->weights == grid->weights);
        CHECK(back[i].grid->band_limit == grid->band_limit);
    }
    CHECK(back[0].grid == back[1].grid);
    CHECK(fs::exists(sidecar_path(p)));

    CHECK(kind_of([&] { write_spectra({}, dir.path / "e.pws"); }) == ErrorKind::contract);
    auto other = spectra;
    other[1].frequency = 7e9;
    CHECK(kind_of([&] { write_spectra(other, dir.path / "o.pws"); }) == ErrorKind::contract);
}

TEST_CASE("image round trip")
{
    TempDir dir;
    VoxelGrid g = VoxelGrid::box(Vec3(-0.02, -0.01, 0.0), Vec3(0.02, 0.01, 0.01), 0.01);
    ImageVolume single{g, CField::Random(3, g.size()), 8.1e9};
    ImageVolume fused{g, CField::Random(3, g.size()), std::nullopt};
    for (const ImageVolume *v : {&single, &fused})
    {
        const fs::path p = dir.path / (v->frequency ? "a.img" : "b.img");
        write_image(*v, p);
        CHECK(slurp(p).substr(0, 4) == "IMG1");
        const ImageVolume back = read_image(p);
        CHECK(back.grid.same_geometry(g, 0.0));
        CHECK(back.values == v->values);
        CHECK(back.frequency == v->frequency);
        CHECK(fs::file_size(p) == 4 + 4 + 4 + 8 + 24 + 72 + 12 + 24 + 48 * std::size_t(g.size()));
    }
    ImageVolume broken{g, CField::Zero(3, 2), std::nullopt};
    CHECK(kind_of([&] { write_image(broken, dir.path / "x.img"); }) == ErrorKind::contract);
}

TEST_CASE("MIP export as PGM and CSV")
{
    TempDir dir;
    MipMap mip;
    mip.axis = Component::z;
    mip.peak = 3.0;
    mip.magnitude = Eigen::ArrayXXd::Zero(3, 2);
    mip.magnitude(0, 0) = 1.0;
    mip.magnitude(1, 0) = 0.1;  // -20 dB
    mip.magnitude(2, 1) = 1e-3; // -60 dB, below the floor
    const fs::path p = dir.path / "m.pgm";
    write_mip_pgm(mip, p, -40.0);
    const std::string bytes = slurp(p);
    const std::string header = "P5\n3 2\n65535\n";
    REQUIRE(bytes.size() == header.size() + 12);
    CHECK(bytes.substr(0, header.size()) == header);
    const auto px = [&](int row, int col) {
        const std::size_t o = header.size() + 2 * std::size_t(row * 3 + col);
        return (unsigned(std::uint8_t(bytes[o])) << 8) | unsigned(std::uint8_t(bytes[o + 1]));
    };
    CHECK(px(0, 0) == 65535u);
    CHECK(px(0, 1) == 32768u); // round(65535 * 20 / 40)
    CHECK(px(0, 2) == 0u);
    CHECK(px(1, 2) == 0u);
    const auto side = nlohmann::json::parse(slurp(sidecar_path(p)));
    CHECK(side["floor_db"] == -40.0);
    CHECK(side["width"] == 3);
    CHECK(side["height"] == 2);
    CHECK(side["column_axis"] == "x");
    CHECK(side["row_axis"] == "y");
    CHECK(side["peak_linear"] == 3.0);

    const fs::path c = dir.path / "m.csv";
    write_mip_csv(mip, c, -40.0);
    std::ifstream is(c);
    std::string line0, line1;
    std::getline(is, line0);
    std::getline(is, line1);
    CHECK(line0 == "0,-20,-40");
    CHECK(line1 == "-40,-40,-40");

    CHECK(kind_of([&] { write_mip_pgm(mip, p, 0.0); }) == ErrorKind::config);
}

TEST_CASE("sha256 of known content")
{
    TempDir dir;
    spit(dir.path / "abc", "abc");
    CHECK(sha256_file(dir.path / "abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    spit(dir.path / "empty", "");
    CHECK(sha256_file(dir.path / "empty") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(kind_of([&] { sha256_file(dir.path / "nope"); }) == ErrorKind::io);
}
