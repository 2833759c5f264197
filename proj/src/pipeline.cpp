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

#include "nfisr/pipeline.hpp"
#include "nfisr/io.hpp"
#include "nfisr/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace nfisr
{
    namespace
    {
        using json = nlohmann::json;
        namespace fs = std::filesystem;

        // JSON object view that rejects unknown keys, so misspelled settings fail loudly
        class Section
        {
        public:
            Section(const json &j, std::string name) : j_(j), name_(std::move(name))
            {
                if (!j_.is_object())
                    throw Error(ErrorKind::config, "section '" + name_ + "' must be an object");
            }

            ~Section() noexcept(false)
            {
                if (std::uncaught_exceptions())
                    return;
                for (const auto &[key, value] : j_.items())
                    if (!used_.count(key))
                        throw Error(ErrorKind::config, "unknown key '" + key + "' in section '" + name_ + "'");
            }

            bool has(const std::string &key) const { return j_.contains(key) && !j_.at(key).is_null(); }

            const json &raw(const std::string &key)
            {
                used_.insert(key);
                if (!has(key))
                    throw Error(ErrorKind::config, "missing key '" + key + "' in section '" + name_ + "'");
                return j_.at(key);
            }

            Section sub(const std::string &key) { return Section(raw(key), name_ + "." + key); }

            template <typename T>
            T get(const std::string &key)
            {
                try
                {
                    return raw(key).get<T>();
                }
                catch (const json::exception &e)
                {
                    throw Error(ErrorKind::config, "key '" + name_ + "." + key + "': " + e.what());
                }
            }

            template <typename T>
            T get(const std::string &key, T fallback)
            {
                used_.insert(key);
                return has(key) ? get<T>(key) : fallback;
            }

            Vec3 vec(const std::string &key)
            {
                const auto v = get<std::vector<double>>(key);
                if (v.size() != 3)
                    throw Error(ErrorKind::config, "key '" + name_ + "." + key + "' needs three numbers");
                return Vec3(v[0], v[1], v[2]);
            }

            void mark(const std::string &key) { used_.insert(key); }

        private:
            const json &j_;
            std::string name_;
            std::set<std::string> used_;
        };

        std::vector<Component> parse_components(const std::string &s)
        {
            std::vector<Component> out;
            for (char ch : s)
                out.push_back(parse_component(std::string(1, ch)));
            if (out.empty())
                throw Error(ErrorKind::config, "empty component list");
            return out;
        }

        std::vector<double> parse_frequencies(Section s)
        {
            std::vector<double> f;
            if (s.has("list_ghz"))
            {
                for (double g : s.get<std::vector<double>>("list_ghz"))
                    f.push_back(g * 1e9);
                return f;
            }
            const double start = s.get<double>("start_ghz") * 1e9;
            const double stop = s.get<double>("stop_ghz") * 1e9;
            const double step = s.get<double>("step_mhz") * 1e6;
            if (!(step > 0.0) || !(stop >= start))
                throw Error(ErrorKind::config, "frequency sweep needs step > 0 and stop >= start");
            const auto n = Index(std::llround((stop - start) / step)) + 1;
            for (Index i = 0; i < n; ++i)
                f.push_back(start + double(i) * step);
            return f;
        }

        SourceRegion parse_region(Section s)
        {
            SourceRegion r;
            r.role = parse_role(s.get<std::string>("role"));
            if (s.has("box_lo_m"))
            {
                const Vec3 lo = s.vec("box_lo_m"), hi = s.vec("box_hi_m");
                r.center = 0.5 * (lo + hi);
                r.radius = 0.5 * (hi - lo).norm();
            }
            else
            {
                r.center = s.vec("center_m");
                r.radius = s.get<double>("radius_m");
            }
            r.order = s.get<int>("order", 0);
            if (!(r.radius > 0.0))
                throw Error(ErrorKind::config, "region radius must be positive");
            return r;
        }

        Vec3 scan_center(const ScanGrid &g)
        {
            return g.origin + 0.5 * (g.n_u - 1) * g.du * g.u_axis + 0.5 * (g.n_v - 1) * g.dv * g.v_axis;
        }

        std::string frame_name(std::size_t i)
        {
            char buf[16];
            std::snprintf(buf, sizeof buf, "f%03zu", i);
            return buf;
        }

        std::vector<fs::path> list_files(const fs::path &dir, const std::string &ext)
        {
            std::vector<fs::path> out;
            if (fs::is_directory(dir))
                for (const auto &e : fs::directory_iterator(dir))
                    if (e.is_regular_file() && e.path().extension() == ext)
                        out.push_back(e.path());
            std::sort(out.begin(), out.end());
            if (out.empty())
                throw Error(ErrorKind::config, "no " + ext + " files in " + dir.string() + " (run the previous stage first)");
            return out;
        }

        void write_text(const fs::path &path, const std::string &text)
        {
            std::ofstream os(path);
            os << text;
            if (!os)
                throw Error(ErrorKind::io, "write failed for " + path.string());
        }

        std::vector<ImageVolume> read_volumes(const fs::path &dir)
        {
            std::vector<ImageVolume> v;
            for (const auto &p : list_files(dir, ".img"))
                v.push_back(read_image(p));
            return v;
        }

        json peak_json(const PeakLocation &p)
        {
            return {{"voxel", p.voxel}, {"position_m", {p.position.x(), p.position.y(), p.position.z()}}, {"magnitude", p.magnitude}};
        }

        void add_noise(FieldDataset &ds, double noise_db, std::uint64_t seed)
        {
            for (std::size_t f = 0; f < ds.probe.size(); ++f)
            {
                auto &block = ds.probe[f];
                Rng rng(seed, "noise", f);
                const double rms = block.norm() / std::sqrt(double(std::max<Index>(1, block.size())));
                const double sigma = rms * std::pow(10.0, noise_db / 20.0);
                for (Index i = 0; i < block.size(); ++i)
                    block.data()[i] += sigma * rng.complex_normal();
            }
        }
    }

    // ---- config ----

    std::vector<double> PipelineConfig::frequencies() const
    {
        return ofdm ? subcarrier_frequencies(*ofdm) : scenario.frequencies;
    }

    std::vector<Vec3> PipelineConfig::scatterer_positions() const
    {
        std::vector<Vec3> p;
        for (const auto &s : scenario.scatterers)
            p.push_back(s.position);
        return p;
    }

    double PipelineConfig::guard_radius() const
    {
        const auto f = frequencies();
        return guard_wavelengths * wavelength(0.5 * (f.front() + f.back()));
    }

    PipelineConfig parse_config(const std::string &text, const fs::path &origin)
    {
        json root;
        try
        {
            root = json::parse(text);
        }
        catch (const json::exception &e)
        {
            throw Error(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
        }

        PipelineConfig cfg;
        cfg.text = text;
        cfg.path = origin;
        Section top(root, "config");
        cfg.seed = top.get<std::uint64_t>("seed", 0);

        {
            Section s = top.sub("scenario");
            auto &sc = cfg.scenario;
            {
                Section tx = s.sub("tx");
                sc.tx_position = tx.vec("position_m");
                sc.tx_polarization = tx.vec("polarization").normalized();
            }
            {
                Section ref = s.sub("reference");
                sc.ref_position = ref.vec("position_m");
                sc.ref_component = parse_component(ref.get<std::string>("component"));
            }
            s.mark("scatterers");
            if (s.has("scatterers"))
            {
                const json &list = s.raw("scatterers");
                if (!list.is_array())
                    throw Error(ErrorKind::config, "scenario.scatterers must be a list");
                for (const auto &item : list)
                {
                    Section e(item, "scenario.scatterers[]");
                    Scatterer sct;
                    sct.position = e.vec("position_m");
                    const auto refl = e.get<std::vector<double>>("reflectivity", {1.0, 0.0});
                    if (refl.size() != 2)
                        throw Error(ErrorKind::config, "reflectivity is [re, im]");
                    sct.reflectivity = cplx(refl[0], refl[1]);
                    sc.scatterers.push_back(sct);
                }
            }
            {
                Section scan = s.sub("scan");
                const auto width = scan.get<std::vector<double>>("width_m");
                const auto count = scan.get<std::vector<int>>("count");
                if (width.size() != 2 || count.size() != 2)
                    throw Error(ErrorKind::config, "scan.width_m and scan.count need two entries");
                sc.scan = ScanGrid::xy_plane(scan.vec("center_m"), width[0], width[1], count[0], count[1],
                                             parse_components(scan.get<std::string>("components", "xy")));
            }
            if (s.has("frequencies"))
                sc.frequencies = parse_frequencies(s.sub("frequencies"));
            else
                s.mark("frequencies");
            cfg.modulation_spread_db = s.get<double>("modulation_spread_db", 20.0);
            if (s.has("noise_db"))
                cfg.noise_db = s.get<double>("noise_db");
            else
                s.mark("noise_db");
            sc.rng_seed = cfg.seed;
        }

        if (top.has("ofdm"))
        {
            Section o = top.sub("ofdm");
            OfdmConfig oc;
            oc.carrier_frequency = o.get<double>("carrier_ghz", 2.41) * 1e9;
            oc.sample_rate = o.get<double>("sample_rate_mhz", 15.36) * 1e6;
            oc.n_fft = o.get<int>("n_fft", oc.n_fft);
            oc.cyclic_prefix_len = o.get<int>("cyclic_prefix", oc.cyclic_prefix_len);
            oc.n_symbols = o.get<int>("n_symbols", oc.n_symbols);
            oc.active_subcarriers = o.get<std::vector<int>>("subcarrier_offsets", oc.active_subcarriers);
            oc.transmit_spread_db = o.get<double>("transmit_spread_db", oc.transmit_spread_db);
            oc.common_phase_drift = o.get<double>("common_phase_drift_rad", 0.0);
            oc.rng_seed = cfg.seed;
            oc.validate();
            if (o.has("dump_iq_position"))
                cfg.dump_iq_position = o.get<Index>("dump_iq_position");
            else
                o.mark("dump_iq_position");
            cfg.ofdm = oc;
        }
        else
            top.mark("ofdm");

        if (cfg.frequencies().empty())
            throw Error(ErrorKind::config, "no frequencies: give scenario.frequencies or an ofdm section");
        {
            auto probe = cfg.scenario;
            probe.frequencies = cfg.frequencies();
            probe.validate();
        }

        if (top.has("preprocess"))
        {
            Section p = top.sub("preprocess");
            cfg.normalization.min_ref_magnitude = p.get<double>("min_ref_fraction", 1e-6);
            cfg.background_subtract = p.get<bool>("background_subtract", false);
        }
        else
            top.mark("preprocess");
        cfg.normalization.component = cfg.scenario.ref_component;
        cfg.normalization.validate();

        top.mark("regions");
        if (top.has("regions"))
        {
            const json &list = top.raw("regions");
            if (!list.is_array())
                throw Error(ErrorKind::config, "regions must be a list");
            for (const auto &item : list)
                cfg.regions.push_back(parse_region(Section(item, "regions[]")));
        }
        const auto first_scattered = std::find_if(cfg.regions.begin(), cfg.regions.end(),
                                                  [](const SourceRegion &r) { return r.role == SourceRole::scattered; });
        if (first_scattered == cfg.regions.end())
            throw Error(ErrorKind::config, "regions must declare at least one scattered (target) region");
        const bool has_incident = std::any_of(cfg.regions.begin(), cfg.regions.end(),
                                              [](const SourceRegion &r) { return r.role == SourceRole::incident; });
        if (cfg.background_subtract && has_incident)
            throw Error(ErrorKind::config, "background subtraction removes the incident field; drop the incident region");
        if (!cfg.background_subtract && !has_incident)
            cfg.regions.push_back({cfg.scenario.tx_position, 0.02, SourceRole::incident, 0});
        const SourceRegion toi = *std::find_if(cfg.regions.begin(), cfg.regions.end(),
                                               [](const SourceRegion &r) { return r.role == SourceRole::scattered; });

        if (top.has("solver"))
        {
            Section s = top.sub("solver");
            auto &sv = cfg.solver;
            sv.max_iterations = s.get<int>("max_iterations", sv.max_iterations);
            sv.relative_residual_target = s.get<double>("relative_residual_target", sv.relative_residual_target);
            sv.order_digits = s.get<double>("order_digits", sv.order_digits);
            sv.report_every = s.get<int>("report_every", sv.report_every);
        }
        else
            top.mark("solver");
        cfg.solver.validate();

        cfg.voxels = VoxelGrid::box(toi.center - Vec3::Constant(toi.radius), toi.center + Vec3::Constant(toi.radius), 0.01);
        cfg.window.center_direction = (scan_center(cfg.scenario.scan) - toi.center).normalized();
        cfg.corrections.tx_position = cfg.scenario.tx_position;
        cfg.corrections.ref_position = cfg.scenario.ref_position;
        if (top.has("imaging"))
        {
            Section im = top.sub("imaging");
            if (im.has("voxels"))
            {
                Section v = im.sub("voxels");
                cfg.voxels = VoxelGrid::box(v.vec("lo_m"), v.vec("hi_m"), v.get<double>("spacing_m"));
            }
            else
                im.mark("voxels");
            if (im.has("window"))
            {
                Section w = im.sub("window");
                cfg.window.cutoff = w.get<double>("cutoff_deg", 90.0) * pi / 180.0;
                cfg.window.taper = w.get<double>("taper", cfg.window.taper);
                if (w.has("center_direction"))
                    cfg.window.center_direction = w.vec("center_direction").normalized();
                else
                    w.mark("center_direction");
            }
            else
                im.mark("window");
            if (im.has("corrections"))
            {
                Section c = im.sub("corrections");
                cfg.corrections.psi_s = c.get<bool>("psi_s", true);
                cfg.corrections.psi_ref = c.get<bool>("psi_ref", true);
                cfg.corrections.m_s = c.get<bool>("m_s", true);
            }
            else
                im.mark("corrections");
            cfg.fusion = parse_fusion_mode(im.get<std::string>("fusion", "coherent"));
            cfg.mip_axis = parse_component(im.get<std::string>("mip_axis", "z"));
            cfg.mip_floor_db = im.get<double>("mip_floor_db", cfg.mip_floor_db);
            cfg.guard_wavelengths = im.get<double>("guard_wavelengths", cfg.guard_wavelengths);
        }
        else
            top.mark("imaging");
        cfg.voxels.validate();
        cfg.window.validate();
        cfg.corrections.validate();
        if (!(cfg.mip_floor_db < 0.0) || !(cfg.guard_wavelengths > 0.0))
            throw Error(ErrorKind::config, "mip_floor_db must be negative and guard_wavelengths positive");
        return cfg;
    }

    PipelineConfig load_config(const fs::path &path)
    {
        std::ifstream is(path);
        if (!is)
            throw Error(ErrorKind::config, "cannot read config " + path.string());
        std::stringstream ss;
        ss << is.rdbuf();
        return parse_config(ss.str(), path);
    }

    // ---- stages ----

    Measurement simulate_stage(const PipelineConfig &cfg)
    {
        const auto &sc = cfg.scenario;
        const Index M = sc.scan.size(), F = Index(sc.frequencies.size());
        const std::string echo = json::parse(cfg.text).at("scenario").dump();

        Measurement out;
        out.target = synthesize_measurement(sc, ModulationModel::random(M, F, cfg.modulation_spread_db, cfg.seed, 0));
        if (cfg.noise_db)
            add_noise(out.target, *cfg.noise_db, cfg.seed);
        out.target.scenario_echo = echo;
        if (cfg.background_subtract)
        {
            Scenario empty = sc;
            empty.scatterers.clear();
            out.background = synthesize_measurement(empty, ModulationModel::random(M, F, cfg.modulation_spread_db, cfg.seed, 1));
            out.background->scenario_echo = echo;
        }
        return out;
    }

    Measurement simulate_ofdm_stage(const PipelineConfig &cfg)
    {
        if (!cfg.ofdm)
            throw Error(ErrorKind::config, "simulate-ofdm needs an ofdm section");
        const std::string echo = json::parse(cfg.text).at("scenario").dump();
        Measurement out;
        out.target = dataset_from_chain(cfg.scenario, *cfg.ofdm);
        out.target.scenario_echo = echo;
        if (cfg.background_subtract)
        {
            Scenario empty = cfg.scenario;
            empty.scatterers.clear();
            OfdmConfig bg = *cfg.ofdm;
            bg.rng_seed = cfg.ofdm->rng_seed ^ 0x9e3779b97f4a7c15ull; // separate payload/transmit draws
            out.background = dataset_from_chain(empty, bg);
            out.background->scenario_echo = echo;
        }
        return out;
    }

    FieldDataset preprocess_stage(const PipelineConfig &cfg, const Measurement &m)
    {
        FieldDataset ds = normalize_by_reference(m.target, cfg.normalization);
        if (cfg.background_subtract)
        {
            if (!m.background)
                throw Error(ErrorKind::config, "background subtraction configured but no background capture present");
            ds = background_subtract(ds, normalize_by_reference(*m.background, cfg.normalization));
        }
        return ds;
    }

    std::vector<IsrResult> solve_stage(const PipelineConfig &cfg, const FieldDataset &obs)
    {
        std::vector<IsrResult> results;
        std::vector<double> freqs = obs.frequencies;
        std::sort(freqs.begin(), freqs.end());
        for (double f : freqs)
        {
            try
            {
                results.push_back(solve_isr(obs, cfg.regions, cfg.solver, f));
            }
            catch (const Error &e)
            {
                throw Error(e.kind(), "at " + std::to_string(f / 1e9) + " GHz: " + e.what());
            }
        }
        return results;
    }

    ImageVolume image_stage(const PipelineConfig &cfg, const std::vector<PlaneWaveSpectrum> &spectra)
    {
        for (const auto &s : spectra)
            if (s.region.role == SourceRole::scattered)
                return generate_image(s, cfg.voxels, cfg.window);
        throw Error(ErrorKind::contract, "no scattered-role spectrum to image");
    }

    // ---- CLI entry ----

    Verb parse_verb(const std::string &name)
    {
        static const std::pair<const char *, Verb> table[] = {
            {"simulate", Verb::simulate}, {"simulate-ofdm", Verb::simulate_ofdm}, {"invert", Verb::invert},
            {"image", Verb::image},       {"fuse", Verb::fuse},                   {"mip", Verb::mip},
            {"compare", Verb::compare},   {"full", Verb::full}};
        for (const auto &[n, v] : table)
            if (name == n)
                return v;
        throw Error(ErrorKind::config, "unknown verb '" + name + "'");
    }

    const char *verb_name(Verb verb)
    {
        switch (verb)
        {
        case Verb::simulate: return "simulate";
        case Verb::simulate_ofdm: return "simulate-ofdm";
        case Verb::invert: return "invert";
        case Verb::image: return "image";
        case Verb::fuse: return "fuse";
        case Verb::mip: return "mip";
        case Verb::compare: return "compare";
        case Verb::full: return "full";
        }
        return "?";
    }

    int exit_code_for(ErrorKind kind)
    {
        switch (kind)
        {
        case ErrorKind::config:
        case ErrorKind::io:
        case ErrorKind::incompatible:
            return 2;
        default:
            return 3;
        }
    }

    void write_manifest(const PipelineConfig &cfg, const fs::path &dir, Verb verb)
    {
        std::vector<fs::path> files;
        for (const auto &e : fs::recursive_directory_iterator(dir))
            if (e.is_regular_file() && e.path().filename() != "manifest.json")
                files.push_back(fs::relative(e.path(), dir));
        std::sort(files.begin(), files.end());
        json list = json::array();
        for (const auto &rel : files)
            list.push_back({{"path", rel.generic_string()},
                            {"bytes", fs::file_size(dir / rel)},
                            {"sha256", sha256_file(dir / rel)}});
        json m = {{"tool", "nfisr"},
                  {"verb", verb_name(verb)},
                  {"seed", cfg.seed},
                  {"config_path", cfg.path.generic_string()},
                  {"config", cfg.text},
                  {"files", list}};
        write_text(dir / "manifest.json", m.dump(2) + "\n");
    }

    std::string compare_images(const PipelineConfig &cfg, const fs::path &pa, const fs::path &pb, const std::string &metric)
    {
        const ImageVolume a = read_image(pa), b = read_image(pb);
        json r = {{"metric", metric}, {"a", pa.generic_string()}, {"b", pb.generic_string()}};
        if (metric == "peak-to-artifact-db")
        {
            if (!a.grid.same_geometry(b.grid))
                throw Error(ErrorKind::incompatible, "peak-to-artifact comparison needs identical voxel grids");
            const auto truth = cfg.scatterer_positions();
            const double va = peak_to_artifact_db(a, truth, cfg.guard_radius());
            const double vb = peak_to_artifact_db(b, truth, cfg.guard_radius());
            r["guard_radius_m"] = cfg.guard_radius();
            r["value_a_db"] = va;
            r["value_b_db"] = vb;
            r["difference_db"] = va - vb;
        }
        else if (metric == "peak-location")
        {
            r["peak_a"] = peak_json(peak_location(a));
            r["peak_b"] = peak_json(peak_location(b));
        }
        else if (metric == "phase-flatness")
        {
            // per-frequency volumes are looked up next to a
            const auto volumes = read_volumes(pa.parent_path() / "volumes");
            json per = json::array();
            for (const Vec3 &t : cfg.scatterer_positions())
            {
                const auto v = volumes.front().grid.nearest(t);
                const Index flat = volumes.front().grid.index(v[0], v[1], v[2]);
                CorrectionModel off = cfg.corrections;
                off.psi_s = off.psi_ref = false;
                per.push_back({{"scatterer_m", {t.x(), t.y(), t.z()}},
                               {"voxel", v},
                               {"circular_std_rad", phase_flatness(volumes, cfg.corrections, flat)},
                               {"uncorrected_circular_std_rad", phase_flatness(volumes, off, flat)}});
            }
            r["scatterers"] = per;
        }
        else
            throw Error(ErrorKind::config, "unknown metric '" + metric + "'");
        return r.dump(2);
    }

    int run_pipeline(const PipelineConfig &cfg_in, const RunOptions &opt)
    {
        PipelineConfig cfg = cfg_in;
        if (opt.seed)
        {
            cfg.seed = *opt.seed;
            cfg.scenario.rng_seed = *opt.seed;
            if (cfg.ofdm)
                cfg.ofdm->rng_seed = *opt.seed;
        }
        const fs::path out = opt.out_dir;
        std::string stage = "setup";
        try
        {
            fs::create_directories(out);
            fs::remove(out / "error.json");

            const auto simulate = [&]
            {
                stage = cfg.ofdm ? "simulate-ofdm" : "simulate";
                const Measurement m = cfg.ofdm ? simulate_ofdm_stage(cfg) : simulate_stage(cfg);
                write_dataset(m.target, out / "dataset.nfd");
                if (m.background)
                    write_dataset(*m.background, out / "background.nfd");
                if (cfg.ofdm && cfg.dump_iq_position)
                {
                    const Index pos = *cfg.dump_iq_position;
                    if (pos < 0 || pos >= cfg.scenario.scan.size())
                        throw Error(ErrorKind::config, "dump_iq_position outside the scan grid");
                    Scenario sc = cfg.scenario;
                    sc.frequencies = subcarrier_frequencies(*cfg.ofdm);
                    std::vector<BornFields> fields;
                    for (double f : sc.frequencies)
                        fields.push_back(born_fields(sc, f));
                    const CaptureRecords rec = capture_position(sc, *cfg.ofdm, fields, pos);
                    fs::create_directories(out / "iq");
                    const std::string tag = "_m" + std::to_string(pos) + ".cf32";
                    for (std::size_t c = 0; c < rec.probe.size(); ++c)
                        write_iq_cf32(rec.probe[c], out / "iq" / (std::string("probe_") + component_name(sc.scan.components[c]) + tag));
                    write_iq_cf32(rec.reference, out / "iq" / ("reference" + tag));
                }
            };

            const auto invert = [&]
            {
                stage = "normalize";
                Measurement m;
                m.target = read_dataset(out / "dataset.nfd");
                if (cfg.background_subtract)
                    m.background = read_dataset(out / "background.nfd");
                const FieldDataset obs = preprocess_stage(cfg, m);
                stage = "solve";
                const auto results = solve_stage(cfg, obs);
                fs::remove_all(out / "spectra");
                fs::create_directories(out / "spectra");
                json summary = json::array();
                std::ostringstream lines;
                for (std::size_t i = 0; i < results.size(); ++i)
                {
                    const auto &d = results[i].diagnostics;
                    write_spectra(results[i].spectra, out / "spectra" / (frame_name(i) + ".pws"));
                    summary.push_back({{"frequency_hz", d.frequency},
                                       {"iterations", d.iterations},
                                       {"relative_misfit", d.relative_misfit},
                                       {"converged", d.converged},
                                       {"stagnated", d.stagnated},
                                       {"adjoint_defect", d.adjoint_defect},
                                       {"message", d.message}});
                    lines << "# frequency_hz " << d.frequency << '\n';
                    for (std::size_t it = 0; it < d.residual_history.size(); ++it)
                        lines << it << ' ' << d.residual_history[it] << '\n';
                }
                write_text(out / "solve_summary.json", summary.dump(2) + "\n");
                write_text(out / "residuals.txt", lines.str());
            };

            const auto image = [&]
            {
                stage = "image";
                const auto inputs = list_files(out / "spectra", ".pws");
                fs::remove_all(out / "volumes");
                fs::create_directories(out / "volumes");
                for (std::size_t i = 0; i < inputs.size(); ++i)
                    write_image(image_stage(cfg, read_spectra(inputs[i])), out / "volumes" / (frame_name(i) + ".img"));
            };

            const auto fuse = [&](std::vector<FusionMode> modes)
            {
                stage = "fuse";
                const auto volumes = read_volumes(out / "volumes");
                for (FusionMode mode : modes)
                    write_image(combine_frequencies(volumes, cfg.corrections, mode),
                                out / (std::string("fused_") + fusion_mode_name(mode) + ".img"));
            };

            const auto mip = [&]
            {
                stage = "mip";
                const auto volumes = read_volumes(out / "volumes");
                const auto f = cfg.frequencies();
                const double mid = 0.5 * (f.front() + f.back());
                const auto single = std::min_element(volumes.begin(), volumes.end(), [&](const auto &a, const auto &b)
                                                     { return std::abs(*a.frequency - mid) < std::abs(*b.frequency - mid); });
                const auto emit = [&](const ImageVolume &v, const std::string &name)
                {
                    const MipMap map = mip_project(v, cfg.mip_axis);
                    write_mip_pgm(map, out / (name + ".pgm"), cfg.mip_floor_db);
                    write_mip_csv(map, out / (name + ".csv"), cfg.mip_floor_db);
                };
                emit(*single, "mip_single");
                for (FusionMode mode : {FusionMode::incoherent, FusionMode::coherent})
                {
                    const fs::path p = out / (std::string("fused_") + fusion_mode_name(mode) + ".img");
                    if (fs::exists(p))
                        emit(read_image(p), std::string("mip_") + fusion_mode_name(mode));
                }
            };

            switch (opt.verb)
            {
            case Verb::simulate:
                if (cfg.ofdm)
                    throw Error(ErrorKind::config, "config has an ofdm section; use simulate-ofdm");
                simulate();
                break;
            case Verb::simulate_ofdm:
                if (!cfg.ofdm)
                    throw Error(ErrorKind::config, "simulate-ofdm needs an ofdm section");
                simulate();
                break;
            case Verb::invert:
                invert();
                break;
            case Verb::image:
                image();
                break;
            case Verb::fuse:
                fuse(opt.mode ? std::vector{*opt.mode} : std::vector{FusionMode::coherent, FusionMode::incoherent});
                break;
            case Verb::mip:
                mip();
                break;
            case Verb::compare:
            {
                stage = "compare";
                if (opt.inputs.size() != 2)
                    throw Error(ErrorKind::config, "compare needs exactly two image files");
                const std::string report = compare_images(cfg, opt.inputs[0], opt.inputs[1], opt.metric);
                std::cout << report << '\n';
                write_text(out / ("compare_" + opt.metric + ".json"), report + "\n");
                break;
            }
            case Verb::full:
            {
                simulate();
                invert();
                image();
                fuse({FusionMode::coherent, FusionMode::incoherent});
                mip();
                stage = "report";
                const ImageVolume coh = read_image(out / "fused_coherent.img");
                const ImageVolume inc = read_image(out / "fused_incoherent.img");
                json report = {{"peak_coherent", peak_json(peak_location(coh))},
                               {"peak_incoherent", peak_json(peak_location(inc))}};
                if (!cfg.scenario.scatterers.empty())
                {
                    report["guard_radius_m"] = cfg.guard_radius();
                    try
                    {
                        report["peak_to_artifact_coherent_db"] = peak_to_artifact_db(coh, cfg.scatterer_positions(), cfg.guard_radius());
                        report["peak_to_artifact_incoherent_db"] = peak_to_artifact_db(inc, cfg.scatterer_positions(), cfg.guard_radius());
                    }
                    catch (const Error &e)
                    {
                        if (e.kind() != ErrorKind::metric)
                            throw;
                        report["peak_to_artifact_note"] = e.what();
                    }
                }
                write_text(out / "summary.json", report.dump(2) + "\n");
                std::cout << report.dump(2) << '\n';
                break;
            }
            }
            stage = "manifest";
            write_manifest(cfg, out, opt.verb);
            return 0;
        }
        catch (const std::exception &e)
        {
            const Error *err = dynamic_cast<const Error *>(&e);
            const ErrorKind kind = err ? err->kind() : (dynamic_cast<const json::exception *>(&e) ? ErrorKind::config : ErrorKind::contract);
            const json report = {{"verb", verb_name(opt.verb)}, {"stage", stage}, {"kind", error_kind_name(kind)}, {"message", e.what()}};
            std::cerr << "error: " << report.dump() << '\n';
            try
            {
                if (fs::is_directory(out))
                {
                    write_text(out / "error.json", report.dump(2) + "\n");
                    write_manifest(cfg, out, opt.verb);
                }
            }
            catch (const std::exception &)
            {
            }
            return exit_code_for(kind);
        }
    }
}
