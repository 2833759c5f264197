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

#include "nfisr/isr.hpp"
#include "nfisr/random.hpp"

using namespace nfisr;

namespace
{
    Scenario small_scenario(int n = 10)
    {
        Scenario s;
        s.tx_position = Vec3(0, 0, 0.5);
        s.tx_polarization = Vec3::UnitY();
        s.ref_position = Vec3(-0.5, 0, 0.8);
        s.ref_component = Component::y;
        s.scatterers = {{Vec3(-0.02, 0, 0), 1.0}, {Vec3(0.02, 0.01, 0.01), 0.8}};
        s.scan = ScanGrid::xy_plane(Vec3(0, 0, 1), 1.0, 1.0, n, n);
        s.frequencies = {3e9, 3.5e9};
        s.rng_seed = 7;
        return s;
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
        return ErrorKind::io;
    }

    Points sphere_probes(int n, double radius)
    {
        Points p(3, n);
        for (int i = 0; i < n; ++i)
        {
            const double z = 1.0 - (2.0 * i + 1.0) / n, rho = std::sqrt(1.0 - z * z), phi = i * pi * (3.0 - std::sqrt(5.0));
            p.col(i) = radius * Vec3(rho * std::cos(phi), rho * std::sin(phi), z);
        }
        return p;
    }

    std::vector<CField> random_spectra(const PlaneWaveOperator &op, std::uint64_t seed)
    {
        Rng rng(seed, "isr-test");
        auto x = op.zero_spectra();
        for (auto &b : x)
        {
            for (Index i = 0; i < b.size(); ++i)
                b.data()[i] = rng.complex_normal();
            b = project_transverse(*op.grid(), b);
        }
        return x;
    }
}

TEST_CASE("normalization removes the modulation for every seed")
{
    const Scenario s = small_scenario();
    const NormalizationConfig cfg;
    const FieldDataset plain = normalize_by_reference(
        synthesize_measurement(s, ModulationModel::identity(s.scan.size(), 2)), cfg);
    for (std::uint64_t seed = 0; seed < 20; ++seed)
    {
        const auto mod = ModulationModel::random(s.scan.size(), 2, 20.0, seed);
        const FieldDataset n = normalize_by_reference(synthesize_measurement(s, mod), cfg);
        CHECK(n.normalized);
        for (Index f = 0; f < 2; ++f)
        {
            const auto &a = n.probe[std::size_t(f)], &b = plain.probe[std::size_t(f)];
            CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * b.cwiseAbs().maxCoeff());
        }
        CHECK((n.ref.array() - 1.0).abs().maxCoeff() == 0.0);
    }
}

TEST_CASE("normalization is idempotent")
{
    const Scenario s = small_scenario();
    const auto mod = ModulationModel::random(s.scan.size(), 2, 20.0, 3);
    const FieldDataset once = normalize_by_reference(synthesize_measurement(s, mod), {});
    const FieldDataset twice = normalize_by_reference(once, {});
    for (std::size_t f = 0; f < 2; ++f)
        CHECK(once.probe[f] == twice.probe[f]);
    CHECK(once.ref == twice.ref);
}

TEST_CASE("normalization contracts")
{
    const Scenario s = small_scenario(4);
    FieldDataset raw = synthesize_measurement(s, ModulationModel::random(16, 2, 20.0, 1));
    NormalizationConfig cfg;
    cfg.component = Component::x;
    CHECK(kind_of([&] { normalize_by_reference(raw, cfg); }) == ErrorKind::contract);

    FieldDataset weak = raw;
    weak.ref(5, 1) = 0.0;
    try
    {
        normalize_by_reference(weak, {});
        FAIL("expected degenerate reference");
    }
    catch (const Error &e)
    {
        CHECK(e.kind() == ErrorKind::degenerate_reference);
        CHECK(std::string(e.what()).find("(m=5, f=1)") != std::string::npos);
    }

    NormalizationConfig bad;
    bad.min_ref_magnitude = 0.0;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::config);
    bad.min_ref_magnitude = 1.5;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::config);
}

TEST_CASE("background subtraction")
{
    Scenario s = small_scenario(4);
    const FieldDataset target = normalize_by_reference(synthesize_measurement(s, ModulationModel::random(16, 2, 20.0, 1)), {});
    Scenario empty = s;
    empty.scatterers.clear();
    const FieldDataset bg = normalize_by_reference(synthesize_measurement(empty, ModulationModel::random(16, 2, 20.0, 1, 1)), {});
    const FieldDataset diff = background_subtract(target, bg);
    CHECK(diff.background_subtracted);
    CHECK(diff.normalized);
    for (std::size_t f = 0; f < 2; ++f)
        CHECK((diff.probe[f] - (target.probe[f] - bg.probe[f])).norm() == 0.0);

    const FieldDataset self = background_subtract(target, target);
    CHECK(self.probe[0].norm() == 0.0);

    FieldDataset raw = synthesize_measurement(s, ModulationModel::identity(16, 2));
    CHECK(kind_of([&] { background_subtract(raw, bg); }) == ErrorKind::contract);
    FieldDataset shifted = bg;
    shifted.frequencies[1] += 1e6;
    CHECK(kind_of([&] { background_subtract(target, shifted); }) == ErrorKind::incompatible);
    FieldDataset moved = bg;
    moved.probe_positions(2, 3) += 1e-3;
    CHECK(kind_of([&] { background_subtract(target, moved); }) == ErrorKind::incompatible);
}

TEST_CASE("resolve_orders keeps explicit orders")
{
    const std::vector<SourceRegion> in{{Vec3::Zero(), 0.1, SourceRole::scattered, 0},
                                       {Vec3(0, 0, 0.5), 0.02, SourceRole::incident, 4}};
    const auto out = resolve_orders(in, 8e9, 3.0);
    CHECK(out[0].order == select_order(wavenumber(8e9), 0.2, 3.0));
    CHECK(out[1].order == 4);
}

TEST_CASE("solver configuration validation")
{
    SolverConfig c;
    CHECK_NOTHROW(c.validate());
    c.max_iterations = 0;
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
    c = {};
    c.relative_residual_target = -1.0;
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
}

TEST_CASE("inverse crime recovers the data")
{
    // probes on an enclosing sphere so every plane-wave mode is observed
    const double f = 8e9, k = wavenumber(f);
    const std::vector<SourceRegion> regions{{Vec3::Zero(), 0.1, SourceRole::scattered, select_order(k, 0.2, 3.0)}};
    const GridPtr grid = make_grid(regions);
    const Points probes = sphere_probes(1600, 0.5);
    const PlaneWaveOperator op(regions, grid, f, probes, {Component::x, Component::y, Component::z});
    std::vector<CField> truth = op.zero_spectra();
    truth[0] = point_source_spectrum(*grid, k, Vec3::Zero(), Vec3(-0.05, 0.0, 0.0), CVec3(0, 1, 0)) +
               0.8 * point_source_spectrum(*grid, k, Vec3::Zero(), Vec3(0.05, 0.02, 0.03), CVec3(0.3, 1, 0));
    const Eigen::MatrixXcd b = op.apply(truth);
    SolverConfig cfg;
    cfg.max_iterations = 200;
    cfg.relative_residual_target = 1e-6;
    const IsrResult r = solve_least_squares(op, b, cfg);
    INFO(r.diagnostics.message << " after " << r.diagnostics.iterations);
    CHECK(r.diagnostics.converged);
    CHECK(r.diagnostics.iterations <= 200);
    CHECK(r.diagnostics.relative_misfit <= 1e-6);
    const Eigen::MatrixXcd Ax = op.apply({r.spectra[0].samples});
    CHECK((Ax - b).norm() / b.norm() == doctest::Approx(r.diagnostics.relative_misfit).epsilon(1e-6));
    for (const auto &sp : r.spectra)
        CHECK(sp.transversality_defect() <= 1e-10);
}

TEST_CASE("residual history never increases")
{
    const double f = 3e9, k = wavenumber(f);
    const std::vector<SourceRegion> regions{{Vec3::Zero(), 0.05, SourceRole::scattered, select_order(k, 0.1, 3.0)}};
    const GridPtr grid = make_grid(regions);
    const Points probes = ScanGrid::xy_plane(Vec3(0, 0, 0.6), 1.0, 1.0, 12, 12).positions();
    const PlaneWaveOperator op(regions, grid, f, probes, {Component::x, Component::y});
    SolverConfig cfg;
    cfg.max_iterations = 150;
    const IsrResult r = solve_least_squares(op, op.apply(random_spectra(op, 11)), cfg);
    const auto &h = r.diagnostics.residual_history;
    REQUIRE(h.size() == std::size_t(r.diagnostics.iterations) + 1);
    CHECK(h.front() == doctest::Approx(1.0));
    for (std::size_t i = 1; i < h.size(); ++i)
        CHECK(h[i] <= h[i - 1] * (1.0 + 1e-12));
}

TEST_CASE("noisy data stops near the noise floor")
{
    const double f = 3e9, k = wavenumber(f);
    const std::vector<SourceRegion> regions{{Vec3::Zero(), 0.05, SourceRole::scattered, select_order(k, 0.1, 3.0)}};
    const GridPtr grid = make_grid(regions);
    const Points probes = ScanGrid::xy_plane(Vec3(0, 0, 0.6), 1.0, 1.0, 12, 12).positions();
    const PlaneWaveOperator op(regions, grid, f, probes, {Component::x, Component::y});
    const Eigen::MatrixXcd clean = op.apply(random_spectra(op, 5));
    Rng rng(5, "noise");
    Eigen::MatrixXcd noise(clean.rows(), clean.cols());
    for (Index i = 0; i < noise.size(); ++i)
        noise.data()[i] = rng.complex_normal();
    const double level = std::pow(10.0, -30.0 / 20.0);
    noise *= level * clean.norm() / noise.norm();
    const Eigen::MatrixXcd b = clean + noise;
    const double floor = noise.norm() / b.norm();
    SolverConfig cfg;
    cfg.relative_residual_target = floor;
    const IsrResult r = solve_least_squares(op, b, cfg);
    CHECK(r.diagnostics.relative_misfit <= 2.0 * floor);
    CHECK(r.diagnostics.relative_misfit >= 0.5 * floor);
}

TEST_CASE("zero data gives a zero solution")
{
    const double f = 3e9;
    const std::vector<SourceRegion> regions{{Vec3::Zero(), 0.05, SourceRole::scattered, 6}};
    const GridPtr grid = make_grid(regions);
    const Points probes = ScanGrid::xy_plane(Vec3(0, 0, 0.6), 1.0, 1.0, 5, 5).positions();
    const PlaneWaveOperator op(regions, grid, f, probes, {Component::y});
    const IsrResult r = solve_least_squares(op, Eigen::MatrixXcd::Zero(25, 1), {});
    CHECK(r.spectra[0].samples.norm() == 0.0);
    CHECK(r.diagnostics.iterations == 0);
}

TEST_CASE("solve_isr region contracts")
{
    const Scenario s = small_scenario(8);
    const FieldDataset raw = synthesize_measurement(s, ModulationModel::random(64, 2, 20.0, 1));
    const FieldDataset norm = normalize_by_reference(raw, {});
    const SourceRegion toi{Vec3::Zero(), 0.05, SourceRole::scattered, 0};
    const SourceRegion inc{s.tx_position, 0.02, SourceRole::incident, 4};
    SolverConfig cfg;
    cfg.max_iterations = 5;
    CHECK(kind_of([&] { solve_isr(raw, {toi, inc}, cfg, 3e9); }) == ErrorKind::contract);
    CHECK(kind_of([&] { solve_isr(norm, {toi}, cfg, 3e9); }) == ErrorKind::contract);
    FieldDataset sub = norm;
    sub.background_subtracted = true;
    CHECK(kind_of([&] { solve_isr(sub, {toi, inc}, cfg, 3e9); }) == ErrorKind::contract);
    CHECK_NOTHROW(solve_isr(sub, {toi}, cfg, 3e9));
    const IsrResult r = solve_isr(norm, {toi, inc}, cfg, 3e9);
    CHECK(r.spectra.size() == 2);
    CHECK(r.diagnostics.adjoint_defect <= 1e-8);
    CHECK(r.diagnostics.frequency == 3e9);
}

TEST_CASE("per frequency failures do not abort the others")
{
    const Scenario s = small_scenario(8);
    const FieldDataset norm = normalize_by_reference(synthesize_measurement(s, ModulationModel::random(64, 2, 20.0, 1)), {});
    SolverConfig cfg;
    cfg.max_iterations = 20;
    const SourceRegion toi{Vec3::Zero(), 0.05, SourceRole::scattered, 0};
    const SourceRegion inc{s.tx_position, 0.02, SourceRole::incident, 4};
    const auto all = solve_all_frequencies(norm, {toi, inc}, cfg);
    CHECK(all.solutions.size() == 2);
    CHECK(all.failures.empty());
}
