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

// nfisr command-line front end
//
//   nfisr <verb> --config FILE --out DIR [--seed N] [--mode coherent|incoherent] [--metric NAME] [IMAGES...]
//
// Thread count comes from NFISR_THREADS (default: all hardware threads).

#include "nfisr/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char **argv)
{
    CLI::App app{"Near-field inverse source imaging with modulated signals"};
    app.set_version_flag("--version", "nfisr 1.0.0");

    std::string verb, config, out, mode, metric = "peak-to-artifact-db";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> images;

    app.add_option("verb", verb, "simulate | simulate-ofdm | invert | image | fuse | mip | compare | full")
        ->required()
        ->check(CLI::IsMember({"simulate", "simulate-ofdm", "invert", "image", "fuse", "mip", "compare", "full"}));
    app.add_option("images", images, "compare: the two image files");
    app.add_option("--config", config, "scenario/pipeline JSON file")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--mode", mode, "fusion mode for fuse")->check(CLI::IsMember({"coherent", "incoherent"}));
    app.add_option("--metric", metric, "compare: peak-to-artifact-db | peak-location | phase-flatness")
        ->check(CLI::IsMember({"peak-to-artifact-db", "peak-location", "phase-flatness"}));

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::Success &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        app.exit(e);
        return 2;
    }

    nfisr::RunOptions opt;
    nfisr::PipelineConfig cfg;
    try
    {
        opt.verb = nfisr::parse_verb(verb);
        cfg = nfisr::load_config(config);
        if (!mode.empty())
            opt.mode = nfisr::parse_fusion_mode(mode);
    }
    catch (const nfisr::Error &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return nfisr::exit_code_for(e.kind());
    }
    opt.out_dir = out;
    opt.seed = seed;
    opt.metric = metric;
    for (const auto &p : images)
        opt.inputs.emplace_back(p);
    return nfisr::run_pipeline(cfg, opt);
}
