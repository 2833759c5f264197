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

#ifndef NFISR_PIPELINE_HPP
#define NFISR_PIPELINE_HPP

#include "nfisr/em_forward.hpp"
#include "nfisr/imaging.hpp"
#include "nfisr/isr.hpp"
#include "nfisr/ofdm.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

// Config-driven orchestration. A run directory holds
//
//   dataset.nfd, background.nfd        simulate / simulate-ofdm
//   iq/*.cf32                          simulate-ofdm with ofdm.dump_iq_position
//   spectra/fNNN.pws, solve_summary.json, residuals.txt    invert
//   volumes/fNNN.img                   image
//   fused_coherent.img, fused_incoherent.img               fuse
//   mip_single, mip_incoherent, mip_coherent (.pgm, .csv)  mip
//   manifest.json                      every file above with its SHA-256, plus the config text
//
// Each file with a binary container also has a JSON sidecar.

namespace nfisr
{
    struct PipelineConfig
    {
        std::string text;            // config file content, echoed verbatim into the manifest
        std::filesystem::path path;  // where it was read from (may be empty)

        Scenario scenario;
        double modulation_spread_db = 20.0;
        std::optional<double> noise_db; // additive complex Gaussian noise relative to the rms probe level
        std::optional<OfdmConfig> ofdm;
        std::optional<Index> dump_iq_position;

        NormalizationConfig normalization;
        bool background_subtract = false;
        std::vector<SourceRegion> regions;
        SolverConfig solver;

        VoxelGrid voxels;
        SpectralWindow window;
        CorrectionModel corrections;
        FusionMode fusion = FusionMode::coherent;
        Component mip_axis = Component::z;
        double mip_floor_db = -40.0;
        double guard_wavelengths = 2.0; // guard radius of the peak-to-artifact metric, in center-band wavelengths

        std::uint64_t seed = 0;

        // Frequencies of the reconstruction: the scenario list, or the subcarriers for OFDM runs
        std::vector<double> frequencies() const;
        std::vector<Vec3> scatterer_positions() const;
        double guard_radius() const;
    };

    // JSON text with unit-suffixed keys; see the files under scenarios/ for the layout.
    // - Throws ErrorKind::config for malformed or inconsistent content
    PipelineConfig parse_config(const std::string &text, const std::filesystem::path &origin = {});
    PipelineConfig load_config(const std::filesystem::path &path);

    // ---- stages ----

    struct Measurement
    {
        FieldDataset target;
        std::optional<FieldDataset> background; // present when background subtraction is configured
    };

    Measurement simulate_stage(const PipelineConfig &cfg);
    Measurement simulate_ofdm_stage(const PipelineConfig &cfg);

    // normalize -> [background subtract]
    FieldDataset preprocess_stage(const PipelineConfig &cfg, const Measurement &measurement);

    // One IsrResult per frequency in ascending order
    // - Throws ErrorKind::validity / contract / config from the solver, with the frequency attached
    std::vector<IsrResult> solve_stage(const PipelineConfig &cfg, const FieldDataset &observations);

    // Image of the first scattered-role spectrum of each result
    ImageVolume image_stage(const PipelineConfig &cfg, const std::vector<PlaneWaveSpectrum> &spectra);

    // ---- CLI entry ----

    enum class Verb
    {
        simulate,
        simulate_ofdm,
        invert,
        image,
        fuse,
        mip,
        compare,
        full
    };

    Verb parse_verb(const std::string &name);
    const char *verb_name(Verb verb);

    struct RunOptions
    {
        Verb verb = Verb::full;
        std::filesystem::path out_dir;
        std::optional<std::uint64_t> seed;      // overrides the config seed
        std::optional<FusionMode> mode;         // fuse: only this mode; full: fusion used for reporting
        std::vector<std::filesystem::path> inputs; // compare: two image files
        std::string metric = "peak-to-artifact-db";
    };

    // Runs one verb, writes the manifest, and returns the exit status: 0 success, 2 configuration or
    // file error, 3 numerical-stage error. Failures are reported on stderr and in <out>/error.json.
    int run_pipeline(const PipelineConfig &cfg, const RunOptions &options);

    // Exit status for an error kind
    int exit_code_for(ErrorKind kind);

    // Metric report comparing two volumes; metric is one of peak-to-artifact-db, peak-location,
    // phase-flatness (the last reads the per-frequency volumes next to `a`). Returned as JSON text.
    std::string compare_images(const PipelineConfig &cfg, const std::filesystem::path &a, const std::filesystem::path &b,
                               const std::string &metric);

    // Rewrites <dir>/manifest.json listing every other file under dir with size and SHA-256
    void write_manifest(const PipelineConfig &cfg, const std::filesystem::path &dir, Verb verb);
}

#endif // NFISR_PIPELINE_HPP
