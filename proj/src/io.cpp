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

#include "nfisr/io.hpp"

#include "json.hpp"
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace nfisr
{
    namespace
    {
        static_assert(std::endian::native == std::endian::little, "containers are written in host order");

        using json = nlohmann::json;

        class Writer
        {
        public:
            explicit Writer(const std::filesystem::path &path) : path_(path), os_(path, std::ios::binary)
            {
                if (!os_)
                    throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
            }

            template <typename T>
            void put(T v) { os_.write(reinterpret_cast<const char *>(&v), sizeof(T)); }

            void magic(const char (&m)[5]) { os_.write(m, 4); put(container_version); }
            void reals(const double *p, Index n) { os_.write(reinterpret_cast<const char *>(p), std::streamsize(n * 8)); }
            void complexes(const cplx *p, Index n) { reals(reinterpret_cast<const double *>(p), 2 * n); }

            void close()
            {
                os_.close();
                if (!os_)
                    throw Error(ErrorKind::io, "write failed for " + path_.string());
            }

        private:
            std::filesystem::path path_;
            std::ofstream os_;
        };

        class Reader
        {
        public:
            Reader(const std::filesystem::path &path, const char (&m)[5]) : path_(path), is_(path, std::ios::binary)
            {
                if (!is_)
                    throw Error(ErrorKind::io, "cannot open " + path.string());
                char got[4];
                raw(got, 4);
                if (std::memcmp(got, m, 4) != 0)
                    throw Error(ErrorKind::io, path.string() + " is not a " + std::string(m) + " container");
                const auto v = get<std::uint32_t>();
                if (v != container_version)
                    throw Error(ErrorKind::io, path.string() + ": unsupported version " + std::to_string(v));
            }

            template <typename T>
            T get()
            {
                T v;
                raw(reinterpret_cast<char *>(&v), sizeof(T));
                return v;
            }

            void reals(double *p, Index n) { raw(reinterpret_cast<char *>(p), std::size_t(n) * 8); }
            void complexes(cplx *p, Index n) { reals(reinterpret_cast<double *>(p), 2 * n); }

            void finish()
            {
                if (is_.peek() != std::char_traits<char>::eof())
                    throw Error(ErrorKind::io, path_.string() + ": trailing bytes after payload");
            }

        private:
            void raw(char *p, std::size_t n)
            {
                is_.read(p, std::streamsize(n));
                if (std::size_t(is_.gcount()) != n)
                    throw Error(ErrorKind::io, path_.string() + ": truncated container");
            }

            std::filesystem::path path_;
            std::ifstream is_;
        };

        void write_json(const json &j, const std::filesystem::path &path)
        {
            std::ofstream os(path);
            os << j.dump(2) << '\n';
            if (!os)
                throw Error(ErrorKind::io, "write failed for " + path.string());
        }

        json vec_json(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

        std::string component_list(const std::vector<Component> &cs)
        {
            std::string s;
            for (Component c : cs)
                s += component_name(c);
            return s;
        }

        Component component_code(std::uint32_t code, const std::filesystem::path &path)
        {
            if (code > 2)
                throw Error(ErrorKind::io, path.string() + ": bad component code " + std::to_string(code));
            return Component(int(code));
        }

        void check_count(std::uint64_t n, std::uint64_t limit, const std::filesystem::path &path)
        {
            if (n > limit)
                throw Error(ErrorKind::io, path.string() + ": implausible dimension " + std::to_string(n));
        }

        constexpr std::uint64_t max_dim = std::uint64_t(1) << 32;
    }

    std::filesystem::path sidecar_path(const std::filesystem::path &path)
    {
        return std::filesystem::path(path.string() + ".json");
    }

    // ---- NFD1 ----

    void write_dataset(const FieldDataset &ds, const std::filesystem::path &path)
    {
        ds.validate();
        const Index M = ds.n_probes(), F = ds.n_frequencies(), C = ds.n_components();
        Writer w(path);
        w.magic("NFD1");
        w.put<std::uint64_t>(std::uint64_t(M));
        w.put<std::uint64_t>(std::uint64_t(F));
        w.put<std::uint32_t>(std::uint32_t(C));
        w.put<std::uint32_t>((ds.normalized ? 1u : 0u) | (ds.background_subtracted ? 2u : 0u));
        w.put<std::uint32_t>(std::uint32_t(index_of(ds.ref_component)));
        for (Component c : ds.components)
            w.put<std::uint32_t>(std::uint32_t(index_of(c)));
        w.reals(ds.frequencies.data(), F);
        w.reals(ds.probe_positions.data(), 3 * M);
        for (Index f = 0; f < F; ++f)
        {
            // row-major (m, c) order within a frequency
            const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = ds.probe[std::size_t(f)];
            w.complexes(rows.data(), M * C);
        }
        for (Index f = 0; f < F; ++f)
        {
            const Eigen::VectorXcd col = ds.ref.col(f);
            w.complexes(col.data(), M);
        }
        w.close();

        json side = {{"format", "NFD1"},
                     {"version", container_version},
                     {"byte_order", "little-endian"},
                     {"n_probes", M},
                     {"n_frequencies", F},
                     {"components", component_list(ds.components)},
                     {"ref_component", std::string(1, component_name(ds.ref_component))},
                     {"normalized", ds.normalized},
                     {"background_subtracted", ds.background_subtracted},
                     {"frequency_unit", "Hz"},
                     {"position_unit", "m"},
                     {"probe_payload_order", "frequency, probe, component; f64 re/im"},
                     {"ref_payload_order", "frequency, probe; f64 re/im"}};
        side["scenario"] = ds.scenario_echo.empty() ? json(nullptr) : json::parse(ds.scenario_echo, nullptr, false);
        write_json(side, sidecar_path(path));
    }

    FieldDataset read_dataset(const std::filesystem::path &path)
    {
        Reader r(path, "NFD1");
        FieldDataset ds;
        const auto M = r.get<std::uint64_t>(), F = r.get<std::uint64_t>();
        const auto C = r.get<std::uint32_t>(), flags = r.get<std::uint32_t>();
        check_count(M, max_dim, path);
        check_count(F, max_dim, path);
        check_count(C, 3, path);
        ds.normalized = flags & 1u;
        ds.background_subtracted = flags & 2u;
        ds.ref_component = component_code(r.get<std::uint32_t>(), path);
        for (std::uint32_t c = 0; c < C; ++c)
            ds.components.push_back(component_code(r.get<std::uint32_t>(), path));
        ds.frequencies.resize(F);
        r.reals(ds.frequencies.data(), Index(F));
        ds.probe_positions.resize(3, Index(M));
        r.reals(ds.probe_positions.data(), 3 * Index(M));
        for (std::uint64_t f = 0; f < F; ++f)
        {
            Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows{Index(M), Index(C)};
            r.complexes(rows.data(), Index(M * C));
            ds.probe.emplace_back(rows);
        }
        ds.ref.resize(Index(M), Index(F));
        for (std::uint64_t f = 0; f < F; ++f)
        {
            Eigen::VectorXcd col{Index(M)};
            r.complexes(col.data(), Index(M));
            ds.ref.col(Index(f)) = col;
        }
        r.finish();

        const auto side = sidecar_path(path);
        if (std::filesystem::exists(side))
        {
            std::ifstream is(side);
            const json j = json::parse(is, nullptr, false);
            if (!j.is_discarded() && j.contains("scenario") && !j["scenario"].is_null())
                ds.scenario_echo = j["scenario"].dump();
        }
        ds.validate();
        return ds;
    }

    // ---- PWS1 ----

    void write_spectra(const std::vector<PlaneWaveSpectrum> &spectra, const std::filesystem::path &path)
    {
        if (spectra.empty())
            throw Error(ErrorKind::contract, "no spectra to write");
        const GridPtr &grid = spectra.front().grid;
        const double freq = spectra.front().frequency;
        for (const auto &s : spectra)
        {
            s.validate();
            if (s.frequency != freq || s.grid != grid)
                throw Error(ErrorKind::contract, "spectra in one container must share frequency and grid");
        }
        const Index Q = grid->size();
        Writer w(path);
        w.magic("PWS1");
        w.put<std::uint32_t>(std::uint32_t(spectra.size()));
        w.put<double>(freq);
        w.put<std::uint64_t>(std::uint64_t(Q));
        w.put<std::uint32_t>(std::uint32_t(grid->band_limit));
        w.put<std::uint32_t>(std::uint32_t(grid->n_theta));
        w.put<std::uint32_t>(std::uint32_t(grid->n_phi));
        w.reals(grid->directions.data(), 3 * Q);
        w.reals(grid->weights.data(), Q);
        json regions = json::array();
        for (const auto &s : spectra)
        {
            w.reals(s.region.center.data(), 3);
            w.put<double>(s.region.radius);
            w.put<std::uint32_t>(s.region.role == SourceRole::incident ? 0u : 1u);
            w.put<std::int32_t>(s.region.order);
            w.complexes(s.samples.data(), 3 * Q);
            regions.push_back({{"center_m", vec_json(s.region.center)},
                               {"radius_m", s.region.radius},
                               {"role", role_name(s.region.role)},
                               {"order", s.region.order}});
        }
        w.close();
        write_json({{"format", "PWS1"},
                    {"version", container_version},
                    {"byte_order", "little-endian"},
                    {"frequency_hz", freq},
                    {"n_directions", Q},
                    {"band_limit", grid->band_limit},
                    {"n_theta", grid->n_theta},
                    {"n_phi", grid->n_phi},
                    {"direction_order", "theta node major, phi node minor"},
                    {"regions", regions}},
                   sidecar_path(path));
    }

    std::vector<PlaneWaveSpectrum> read_spectra(const std::filesystem::path &path)
    {
        Reader r(path, "PWS1");
        const auto n = r.get<std::uint32_t>();
        const auto freq = r.get<double>();
        const auto Q = r.get<std::uint64_t>();
        check_count(Q, max_dim, path);
        auto grid = std::make_shared<QuadratureGrid>();
        grid->band_limit = int(r.get<std::uint32_t>());
        grid->n_theta = int(r.get<std::uint32_t>());
        grid->n_phi = int(r.get<std::uint32_t>());
        if (std::uint64_t(grid->n_theta) * std::uint64_t(grid->n_phi) != Q)
            throw Error(ErrorKind::io, path.string() + ": direction count does not match the grid shape");
        grid->directions.resize(3, Index(Q));
        grid->weights.resize(Index(Q));
        r.reals(grid->directions.data(), 3 * Index(Q));
        r.reals(grid->weights.data(), Index(Q));
        std::vector<PlaneWaveSpectrum> out;
        for (std::uint32_t i = 0; i < n; ++i)
        {
            PlaneWaveSpectrum s;
            s.frequency = freq;
            s.grid = grid;
            r.reals(s.region.center.data(), 3);
            s.region.radius = r.get<double>();
            s.region.role = r.get<std::uint32_t>() == 0 ? SourceRole::incident : SourceRole::scattered;
            s.region.order = r.get<std::int32_t>();
            s.samples.resize(3, Index(Q));
            r.complexes(s.samples.data(), 3 * Index(Q));
            s.validate();
            out.push_back(std::move(s));
        }
        r.finish();
        return out;
    }

    // ---- IMG1 ----

    void write_image(const ImageVolume &volume, const std::filesystem::path &path)
    {
        volume.grid.validate();
        if (volume.values.cols() != volume.grid.size())
            throw Error(ErrorKind::contract, "image payload does not match its voxel grid");
        Writer w(path);
        w.magic("IMG1");
        w.put<std::uint32_t>(volume.frequency ? 1u : 0u);
        w.put<double>(volume.frequency.value_or(0.0));
        w.reals(volume.grid.origin.data(), 3);
        w.reals(volume.grid.axes.data(), 9);
        for (int c : volume.grid.counts)
            w.put<std::uint32_t>(std::uint32_t(c));
        w.reals(volume.grid.spacing.data(), 3);
        w.complexes(volume.values.data(), 3 * volume.values.cols());
        w.close();

        const auto &g = volume.grid;
        json side = {{"format", "IMG1"},
                     {"version", container_version},
                     {"byte_order", "little-endian"},
                     {"fused", volume.is_fused()},
                     {"origin_m", vec_json(g.origin)},
                     {"counts", g.counts},
                     {"spacing_m", vec_json(g.spacing)},
                     {"voxel_order", "x fastest, then y, then z; 3 complex components per voxel"}};
        side["frequency_hz"] = volume.frequency ? json(*volume.frequency) : json(nullptr);
        write_json(side, sidecar_path(path));
    }

    ImageVolume read_image(const std::filesystem::path &path)
    {
        Reader r(path, "IMG1");
        ImageVolume v;
        const auto flags = r.get<std::uint32_t>();
        const auto f = r.get<double>();
        if (flags & 1u)
            v.frequency = f;
        r.reals(v.grid.origin.data(), 3);
        r.reals(v.grid.axes.data(), 9);
        for (int &c : v.grid.counts)
        {
            const auto n = r.get<std::uint32_t>();
            check_count(n, 1u << 20, path);
            c = int(n);
        }
        r.reals(v.grid.spacing.data(), 3);
        v.grid.validate();
        v.values.resize(3, v.grid.size());
        r.complexes(v.values.data(), 3 * v.grid.size());
        r.finish();
        return v;
    }

    // ---- MIP export ----

    void write_mip_pgm(const MipMap &mip, const std::filesystem::path &path, double floor_db)
    {
        if (!(floor_db < 0.0))
            throw Error(ErrorKind::config, "MIP dB floor must be negative");
        const Eigen::ArrayXXd db = mip.db(floor_db);
        const Index width = db.rows(), height = db.cols();
        std::ofstream os(path, std::ios::binary);
        if (!os)
            throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
        os << "P5\n" << width << ' ' << height << "\n65535\n";
        for (Index row = 0; row < height; ++row)
            for (Index col = 0; col < width; ++col)
            {
                const double t = std::clamp((db(col, row) - floor_db) / -floor_db, 0.0, 1.0);
                const auto v = std::uint16_t(std::lround(65535.0 * t));
                const char be[2] = {char(v >> 8), char(v & 0xff)};
                os.write(be, 2);
            }
        os.close();
        if (!os)
            throw Error(ErrorKind::io, "write failed for " + path.string());

        static constexpr const char *plane[3][2] = {{"y", "z"}, {"x", "z"}, {"x", "y"}};
        const auto &axes = plane[index_of(mip.axis)];
        write_json({{"format", "PGM P5 16-bit big-endian"},
                    {"projection_axis", std::string(1, component_name(mip.axis))},
                    {"column_axis", axes[0]},
                    {"row_axis", axes[1]},
                    {"width", width},
                    {"height", height},
                    {"floor_db", floor_db},
                    {"peak_linear", mip.peak},
                    {"scaling", "pixel = round(65535 * (dB - floor_db) / -floor_db), clamped; dB = 20 log10(|J| / peak)"}},
                   sidecar_path(path));
    }

    void write_mip_csv(const MipMap &mip, const std::filesystem::path &path, double floor_db)
    {
        const Eigen::ArrayXXd db = mip.db(floor_db);
        std::ofstream os(path);
        if (!os)
            throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
        os << std::setprecision(10);
        for (Index row = 0; row < db.cols(); ++row)
        {
            for (Index col = 0; col < db.rows(); ++col)
                os << (col ? "," : "") << db(col, row);
            os << '\n';
        }
        os.close();
        if (!os)
            throw Error(ErrorKind::io, "write failed for " + path.string());
    }

    std::string sha256_file(const std::filesystem::path &path)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw Error(ErrorKind::io, "cannot open " + path.string());
        std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
        if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
            throw Error(ErrorKind::io, "SHA-256 initialization failed");
        std::array<char, 1 << 16> buf;
        while (is)
        {
            is.read(buf.data(), buf.size());
            if (is.gcount() > 0)
                EVP_DigestUpdate(ctx.get(), buf.data(), std::size_t(is.gcount()));
        }
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx.get(), md, &len);
        std::ostringstream hex;
        for (unsigned int i = 0; i < len; ++i)
            hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
        return hex.str();
    }
}
