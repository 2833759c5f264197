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

#include "nfisr/ofdm.hpp"
#include "nfisr/parallel.hpp"
#include "nfisr/random.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>

namespace nfisr
{
    namespace
    {
        int bin_of(int offset, int n_fft) { return offset >= 0 ? offset : offset + n_fft; }

        Index whole_symbols(const IqRecord &iq, const OfdmConfig &cfg)
        {
            const Index len = iq.capture_length(), sym = cfg.symbol_length();
            if (len == 0 || len % sym != 0)
                throw Error(ErrorKind::framing, "record of " + std::to_string(len) + " samples is not a whole number of " +
                                                    std::to_string(sym) + "-sample symbols");
            return len / sym;
        }

        // FFT of the prefix-stripped body of symbol s
        Eigen::VectorXcd symbol_spectrum(Eigen::FFT<double> &fft, const IqRecord &iq, const OfdmConfig &cfg, Index s)
        {
            const Eigen::VectorXcd body = iq.samples.segment(s * cfg.symbol_length() + cfg.cyclic_prefix_len, cfg.n_fft);
            Eigen::VectorXcd spec;
            fft.fwd(spec, body);
            return spec;
        }

        // Unscaled inverse FFT with the cyclic prefix prepended, written into out at symbol s
        void emit_symbol(Eigen::FFT<double> &fft, const Eigen::VectorXcd &spec, const OfdmConfig &cfg, Index s,
                         Eigen::VectorXcd &out)
        {
            Eigen::VectorXcd body;
            fft.inv(body, spec);
            body *= double(cfg.n_fft);
            const Index start = s * cfg.symbol_length();
            out.segment(start, cfg.cyclic_prefix_len) = body.tail(cfg.cyclic_prefix_len);
            out.segment(start + cfg.cyclic_prefix_len, cfg.n_fft) = body;
        }
    }

    std::vector<int> OfdmConfig::default_subcarriers()
    {
        std::vector<int> b;
        for (int i = -10; i <= 10; ++i)
            b.push_back(8 * i);
        return b;
    }

    double OfdmConfig::occupied_bandwidth() const
    {
        if (active_subcarriers.empty())
            return 0.0;
        const auto [lo, hi] = std::minmax_element(active_subcarriers.begin(), active_subcarriers.end());
        return (*hi - *lo + 1) * subcarrier_spacing();
    }

    void OfdmConfig::validate() const
    {
        if (n_fft < 2 || !std::has_single_bit(unsigned(n_fft)))
            throw Error(ErrorKind::config, "n_fft must be a power of two >= 2");
        if (cyclic_prefix_len < 0 || cyclic_prefix_len > n_fft)
            throw Error(ErrorKind::config, "cyclic prefix must lie in [0, n_fft]");
        if (n_symbols < 1)
            throw Error(ErrorKind::config, "n_symbols must be positive");
        if (!(sample_rate > 0.0) || !(carrier_frequency > 0.0))
            throw Error(ErrorKind::config, "sample rate and carrier must be positive");
        if (active_subcarriers.empty())
            throw Error(ErrorKind::config, "no active subcarriers");
        std::set<int> seen;
        for (int b : active_subcarriers)
        {
            if (2 * std::abs(b) >= n_fft)
                throw Error(ErrorKind::config, "subcarrier offset " + std::to_string(b) + " outside (-n_fft/2, n_fft/2)");
            if (!seen.insert(b).second)
                throw Error(ErrorKind::config, "duplicate subcarrier offset " + std::to_string(b));
        }
        if (!(sample_rate > occupied_bandwidth()))
            throw Error(ErrorKind::config, "sample rate must exceed the occupied bandwidth");
        if (!(transmit_spread_db >= 0.0) || !std::isfinite(common_phase_drift))
            throw Error(ErrorKind::config, "transmit spread must be >= 0 dB and the phase drift finite");
    }

    std::vector<double> subcarrier_frequencies(const OfdmConfig &cfg)
    {
        std::vector<double> f;
        for (int b : cfg.active_subcarriers)
            f.push_back(cfg.carrier_frequency + b * cfg.subcarrier_spacing());
        return f;
    }

    Eigen::MatrixXcd pilot_symbols(const OfdmConfig &cfg, std::uint64_t realization)
    {
        Rng rng(cfg.rng_seed, "payload", realization);
        const double a = 1.0 / std::sqrt(2.0);
        Eigen::MatrixXcd x(cfg.n_symbols, Index(cfg.active_subcarriers.size()));
        for (Index s = 0; s < x.rows(); ++s)
            for (Index i = 0; i < x.cols(); ++i)
            {
                const std::uint64_t bits = rng.next();
                x(s, i) = cplx(bits & 1 ? a : -a, bits & 2 ? a : -a);
            }
        return x;
    }

    IqRecord ofdm_synthesize(const OfdmConfig &cfg, std::uint64_t realization)
    {
        return ofdm_synthesize(cfg, pilot_symbols(cfg, realization));
    }

    IqRecord ofdm_synthesize(const OfdmConfig &cfg, const Eigen::MatrixXcd &payload)
    {
        cfg.validate();
        if (payload.rows() != cfg.n_symbols || payload.cols() != Index(cfg.active_subcarriers.size()))
            throw Error(ErrorKind::config, "payload must be n_symbols x n_active");
        IqRecord rec;
        rec.sample_rate = cfg.sample_rate;
        rec.samples.resize(cfg.capture_length());
        Eigen::FFT<double> fft;
        Eigen::VectorXcd spec(cfg.n_fft);
        for (Index s = 0; s < cfg.n_symbols; ++s)
        {
            spec.setZero();
            for (std::size_t i = 0; i < cfg.active_subcarriers.size(); ++i)
                spec(bin_of(cfg.active_subcarriers[i], cfg.n_fft)) = payload(s, Index(i));
            emit_symbol(fft, spec, cfg, s, rec.samples);
        }
        return rec;
    }

    IqRecord channel_apply(const IqRecord &iq, const OfdmConfig &cfg, const Eigen::VectorXcd &H)
    {
        if (H.size() != Index(cfg.active_subcarriers.size()))
            throw Error(ErrorKind::config, "channel response needs one entry per active subcarrier");
        const Index n_sym = whole_symbols(iq, cfg);
        IqRecord out = iq;
        Eigen::FFT<double> fft;
        for (Index s = 0; s < n_sym; ++s)
        {
            Eigen::VectorXcd spec = symbol_spectrum(fft, iq, cfg, s) / double(cfg.n_fft);
            for (std::size_t i = 0; i < cfg.active_subcarriers.size(); ++i)
                spec(bin_of(cfg.active_subcarriers[i], cfg.n_fft)) *= H(Index(i));
            emit_symbol(fft, spec, cfg, s, out.samples);
        }
        return out;
    }

    Eigen::VectorXcd extract_harmonics(const IqRecord &iq, const OfdmConfig &cfg, const Eigen::MatrixXcd &pilots)
    {
        const Index n_sym = whole_symbols(iq, cfg);
        const Index n_act = Index(cfg.active_subcarriers.size());
        if (pilots.rows() != n_sym || pilots.cols() != n_act)
            throw Error(ErrorKind::config, "pilot table must be n_symbols x n_active");
        Eigen::VectorXcd num = Eigen::VectorXcd::Zero(n_act);
        Eigen::VectorXd den = Eigen::VectorXd::Zero(n_act);
        Eigen::FFT<double> fft;
        for (Index s = 0; s < n_sym; ++s)
        {
            const Eigen::VectorXcd spec = symbol_spectrum(fft, iq, cfg, s) / double(cfg.n_fft);
            for (Index i = 0; i < n_act; ++i)
            {
                num(i) += spec(bin_of(cfg.active_subcarriers[std::size_t(i)], cfg.n_fft)) * std::conj(pilots(s, i));
                den(i) += std::norm(pilots(s, i));
            }
        }
        for (Index i = 0; i < n_act; ++i)
        {
            if (!(den(i) > 0.0))
                throw Error(ErrorKind::undefined_harmonic,
                            "subcarrier offset " + std::to_string(cfg.active_subcarriers[std::size_t(i)]) + " has no pilot energy");
            num(i) /= den(i);
        }
        return num;
    }

    Eigen::VectorXcd extract_harmonics(const IqRecord &iq, const OfdmConfig &cfg, std::uint64_t realization)
    {
        return extract_harmonics(iq, cfg, pilot_symbols(cfg, realization));
    }

    Eigen::VectorXcd transmit_response(const OfdmConfig &cfg, std::uint64_t realization)
    {
        Rng rng(cfg.rng_seed, "transmit", realization);
        Eigen::VectorXcd b(Index(cfg.active_subcarriers.size()));
        for (Index i = 0; i < b.size(); ++i)
        {
            const double db = rng.uniform(-cfg.transmit_spread_db, cfg.transmit_spread_db);
            const double phase = rng.uniform(0.0, 2.0 * pi);
            b(i) = std::polar(std::pow(10.0, db / 20.0), phase);
        }
        return b;
    }

    CaptureRecords capture_position(const Scenario &scenario, const OfdmConfig &cfg, const std::vector<BornFields> &fields,
                                    Index m)
    {
        const Index F = Index(cfg.active_subcarriers.size());
        if (Index(fields.size()) != F)
            throw Error(ErrorKind::config, "need Born fields at every subcarrier");
        const auto realization = std::uint64_t(m);

        IqRecord tx = channel_apply(ofdm_synthesize(cfg, realization), cfg, transmit_response(cfg, realization));
        if (cfg.common_phase_drift != 0.0)
            for (Index s = 0; s < cfg.n_symbols; ++s)
                tx.samples.segment(s * cfg.symbol_length(), cfg.symbol_length()) *=
                    std::polar(1.0, cfg.common_phase_drift * double(s));

        CaptureRecords out;
        Eigen::VectorXcd H(F);
        for (Component c : scenario.scan.components)
        {
            for (Index f = 0; f < F; ++f)
                H(f) = fields[std::size_t(f)].total()(index_of(c), m);
            out.probe.push_back(channel_apply(tx, cfg, H));
            out.probe.back().channel = ChannelId::probe;
        }
        for (Index f = 0; f < F; ++f)
            H(f) = fields[std::size_t(f)].ref_total()(index_of(scenario.ref_component));
        out.reference = channel_apply(tx, cfg, H);
        out.reference.channel = ChannelId::reference;
        return out;
    }

    FieldDataset dataset_from_chain(const Scenario &scenario_in, const OfdmConfig &cfg)
    {
        cfg.validate();
        Scenario scenario = scenario_in;
        scenario.frequencies = subcarrier_frequencies(cfg);
        std::sort(scenario.frequencies.begin(), scenario.frequencies.end());
        if (scenario.frequencies != subcarrier_frequencies(cfg))
            throw Error(ErrorKind::config, "active subcarriers must be listed in increasing order");
        scenario.validate();

        std::vector<BornFields> fields;
        for (double f : scenario.frequencies)
            fields.push_back(born_fields(scenario, f));

        const Index M = scenario.scan.size(), F = Index(scenario.frequencies.size());
        const Index C = Index(scenario.scan.components.size());
        FieldDataset ds;
        ds.frequencies = scenario.frequencies;
        ds.probe_positions = scenario.scan.positions();
        ds.components = scenario.scan.components;
        ds.ref_component = scenario.ref_component;
        ds.ref.resize(M, F);
        ds.probe.assign(std::size_t(F), Eigen::MatrixXcd(M, C));

        parallel_for(0, std::size_t(M), [&](std::size_t mi)
        {
            const Index m = Index(mi);
            try
            {
                const CaptureRecords rec = capture_position(scenario, cfg, fields, m);
                const Eigen::MatrixXcd pilots = pilot_symbols(cfg, std::uint64_t(m));
                for (Index c = 0; c < C; ++c)
                {
                    const Eigen::VectorXcd h = extract_harmonics(rec.probe[std::size_t(c)], cfg, pilots);
                    for (Index f = 0; f < F; ++f)
                        ds.probe[std::size_t(f)](m, c) = h(f);
                }
                ds.ref.row(m) = extract_harmonics(rec.reference, cfg, pilots).transpose();
            }
            catch (const Error &e)
            {
                throw Error(e.kind(), "position " + std::to_string(m) + ": " + e.what());
            }
        });
        return ds;
    }

    void write_iq_cf32(const IqRecord &iq, const std::filesystem::path &path)
    {
        std::ofstream os(path, std::ios::binary);
        if (!os)
            throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
        std::vector<float> buf(std::size_t(2 * iq.samples.size()));
        for (Index i = 0; i < iq.samples.size(); ++i)
        {
            buf[std::size_t(2 * i)] = float(iq.samples(i).real());
            buf[std::size_t(2 * i + 1)] = float(iq.samples(i).imag());
        }
        static_assert(std::endian::native == std::endian::little, "cf32 output assumes a little-endian host");
        os.write(reinterpret_cast<const char *>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
        if (!os)
            throw Error(ErrorKind::io, "write failed for " + path.string());
    }

    IqRecord read_iq_cf32(const std::filesystem::path &path, double sample_rate)
    {
        std::ifstream is(path, std::ios::binary | std::ios::ate);
        if (!is)
            throw Error(ErrorKind::io, "cannot open " + path.string());
        const auto bytes = std::size_t(is.tellg());
        if (bytes % (2 * sizeof(float)) != 0)
            throw Error(ErrorKind::io, path.string() + " is not a whole number of cf32 samples");
        std::vector<float> buf(bytes / sizeof(float));
        is.seekg(0);
        is.read(reinterpret_cast<char *>(buf.data()), std::streamsize(bytes));
        IqRecord rec;
        rec.sample_rate = sample_rate;
        rec.samples.resize(Index(buf.size() / 2));
        for (Index i = 0; i < rec.samples.size(); ++i)
            rec.samples(i) = cplx(buf[std::size_t(2 * i)], buf[std::size_t(2 * i + 1)]);
        return rec;
    }
}
