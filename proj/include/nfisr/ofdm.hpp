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

#ifndef NFISR_OFDM_HPP
#define NFISR_OFDM_HPP

#include "nfisr/em_forward.hpp"
#include "nfisr/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

// SDR-style measurement chain: OFDM baseband synthesis, per-subcarrier channel responses,
// dual-channel capture and FFT harmonic extraction with known-pilot wipe-off.
//
// Symbols are synthesized with an unscaled inverse FFT, x[n] = sum_b X_b exp(+j 2 pi b n / N), and
// analyzed with FFT / N, so a tone of amplitude A on bin b extracts as A.

namespace nfisr
{
    struct OfdmConfig
    {
        double carrier_frequency = 2.41e9; // Hz
        double sample_rate = 15.36e6;      // Hz
        int n_fft = 256;
        std::vector<int> active_subcarriers = default_subcarriers(); // bin offsets around DC
        int cyclic_prefix_len = 64;
        int n_symbols = 300;
        std::uint64_t rng_seed = 1;

        // Unknown per-capture transmitter response B_m(k) shared by both receive channels:
        // |B| in dB uniform in [-spread, spread], phase uniform
        double transmit_spread_db = 20.0;
        // Common phase ramp per symbol applied to both channels of a capture (emulates missing
        // Tx-Rx synchronization); rad per symbol, 0 disables
        double common_phase_drift = 0.0;

        // 21 offsets -80, -72, ..., 80 (480 kHz step at the default numerology)
        static std::vector<int> default_subcarriers();

        int symbol_length() const { return n_fft + cyclic_prefix_len; }
        Index capture_length() const { return Index(symbol_length()) * n_symbols; }
        double subcarrier_spacing() const { return sample_rate / n_fft; }
        double occupied_bandwidth() const;

        // - Throws ErrorKind::config for a non power-of-two FFT, offsets outside (-N/2, N/2),
        //   duplicate offsets or a sample rate not above the occupied bandwidth
        void validate() const;
    };

    // Absolute frequency carrier + offset * sample_rate / n_fft of every active subcarrier
    std::vector<double> subcarrier_frequencies(const OfdmConfig &cfg);

    enum class ChannelId
    {
        transmit,
        probe,
        reference
    };

    struct IqRecord
    {
        Eigen::VectorXcd samples;
        double sample_rate = 0.0;
        ChannelId channel = ChannelId::transmit;

        Index capture_length() const { return samples.size(); }
    };

    // Known QPSK payload of one transmit realization, n_symbols x n_active, entries (+-1 +-j)/sqrt(2)
    Eigen::MatrixXcd pilot_symbols(const OfdmConfig &cfg, std::uint64_t realization);

    // Baseband record of one transmit realization with cyclic prefixes; deterministic in (seed, realization)
    IqRecord ofdm_synthesize(const OfdmConfig &cfg, std::uint64_t realization = 0);

    // Same, with explicit payload (n_symbols x n_active)
    IqRecord ofdm_synthesize(const OfdmConfig &cfg, const Eigen::MatrixXcd &payload);

    // Per-symbol FFT, active bin b multiplied by H(b), inverse FFT, prefix rebuilt from the symbol tail.
    // Inactive bins pass unchanged.
    // - Throws ErrorKind::framing if the length is not a whole number of symbols
    // - Throws ErrorKind::config if H does not have one entry per active subcarrier
    IqRecord channel_apply(const IqRecord &iq, const OfdmConfig &cfg, const Eigen::VectorXcd &H);

    // Least-squares pilot wipe-off per active bin: sum_s Y_s conj(X_s) / sum_s |X_s|^2 over all symbols
    // - Throws ErrorKind::framing if the record is not a whole, non-zero number of symbols
    // - Throws ErrorKind::undefined_harmonic for a bin whose pilots carry no energy
    Eigen::VectorXcd extract_harmonics(const IqRecord &iq, const OfdmConfig &cfg, const Eigen::MatrixXcd &pilots);
    Eigen::VectorXcd extract_harmonics(const IqRecord &iq, const OfdmConfig &cfg, std::uint64_t realization = 0);

    // Transmitter response B_m(k) of capture m, one entry per active subcarrier
    Eigen::VectorXcd transmit_response(const OfdmConfig &cfg, std::uint64_t realization);

    // Records of one capture: the probe channel for every scan component, then the reference channel
    struct CaptureRecords
    {
        std::vector<IqRecord> probe; // one per scan component
        IqRecord reference;
    };

    // Capture at probe m. `fields[f]` are the Born fields at subcarrier f.
    CaptureRecords capture_position(const Scenario &scenario, const OfdmConfig &cfg, const std::vector<BornFields> &fields,
                                    Index m);

    // Full chain over the scan grid; frequencies are the subcarrier frequencies (scenario.frequencies is
    // ignored). Probe position m uses transmit realization m.
    // - Errors of channel_apply / extract_harmonics are rethrown with "position m" attached
    FieldDataset dataset_from_chain(const Scenario &scenario, const OfdmConfig &cfg);

    // Interleaved little-endian float32 I/Q
    void write_iq_cf32(const IqRecord &iq, const std::filesystem::path &path);
    IqRecord read_iq_cf32(const std::filesystem::path &path, double sample_rate);
}

#endif // NFISR_OFDM_HPP
