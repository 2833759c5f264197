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

#include "nfisr/em_forward.hpp"
#include "nfisr/pws.hpp"
#include "nfisr/random.hpp"

#include <numeric>

using namespace nfisr;

namespace
{
    double gegenbauer_error(double kX, double ratio, double digits)
    {
        const double k = 1.0;
        const Vec3 X = kX * Vec3(0.3, -0.5, 0.8).normalized();
        const Vec3 d = ratio * kX * Vec3(-0.6, 0.2, 0.4).normalized();
        const int L = select_order(k, 2.0 * d.norm(), digits);
        const QuadratureGrid g = sphere_quadrature(L);
        const Eigen::VectorXcd T = translation_operator(L, k, X, g);
        cplx sum = 0.0;
        for (Index q = 0; q < g.size(); ++q)
            sum += g.weights(q) * T(q) * std::exp(-j_unit * (k * g.directions.col(q).dot(d)));
        const cplx approx = (-j_unit * k / (4 * pi)) * sum / (4 * pi);
        const cplx exact = scalar_green(k, X + d, Vec3::Zero());
        return std::abs(approx - exact) / std::abs(exact);
    }

    std::vector<CField> random_spectra(const PlaneWaveOperator &op, std::uint64_t seed)
    {
        Rng rng(seed, "test");
        std::vector<CField> x = op.zero_spectra();
        for (auto &b : x)
        {
            for (Index i = 0; i < b.size(); ++i)
                b.data()[i] = rng.complex_normal();
            b = project_transverse(*op.grid(), b);
        }
        return x;
    }

    Eigen::MatrixXcd probe_data(Index rows, Index cols, std::uint64_t seed)
    {
        Rng rng(seed, "test-data");
        Eigen::MatrixXcd y(rows, cols);
        for (Index i = 0; i < y.size(); ++i)
            y.data()[i] = rng.complex_normal();
        return y;
    }

    struct Setup
    {
        std::vector<SourceRegion> regions;
        GridPtr grid;
        Points probes;
        double f = 8e9;
    };

    Setup desk_setup(int n = 6)
    {
        Setup s;
        const double k = wavenumber(s.f);
        s.regions = {{Vec3::Zero(), 0.06, SourceRole::scattered, select_order(k, 0.12, 3)},
                     {Vec3(0, 0, 0.5), 0.02, SourceRole::incident, 4}};
        s.grid = make_grid(s.regions);
        s.probes = ScanGrid::xy_plane(Vec3(0, 0, 1), 0.8, 0.8, n, n).positions();
        return s;
    }
}

TEST_CASE("select_order rule")
{
    // kD/2 = 10 with d0 = 3
    CHECK(select_order(20.0, 1.0, 3.0) == 19);
    CHECK(std::ceil(10 + 1.8 * std::pow(3.0, 2.0 / 3.0) * std::cbrt(10.0)) == 19);
    CHECK(select_order(1e-6, 1e-6, 3.0) == 4);
    int prev = 0;
    for (double k = 1.0; k < 400.0; k *= 1.1)
    {
        const int L = select_order(k, 0.2, 4.0);
        CHECK(L >= prev);
        CHECK(L >= 4);
        prev = L;
    }
}

TEST_CASE("translation operator L=0 is constant")
{
    const auto g = sphere_quadrature(3);
    const Vec3 X(0.2, 0.1, -0.4);
    const Eigen::VectorXcd T = translation_operator(0, 30.0, X, g);
    const cplx h0 = sph_hankel2(0, 30.0 * X.norm());
    CHECK((T.array() - h0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("translation operator singular at zero")
{
    const auto g = sphere_quadrature(3);
    try
    {
        translation_operator(3, 1.0, Vec3::Zero(), g);
        FAIL("expected singular translation");
    }
    catch (const Error &e)
    {
        CHECK(e.kind() == ErrorKind::singular_translation);
    }
}

TEST_CASE("translation operator depends only on the direction cosine")
{
    const auto g = sphere_quadrature(6);
    const Vec3 X(0.5, -0.2, 0.3);
    const Eigen::VectorXcd T = translation_operator(6, 20.0, X, g);
    std::vector<Index> perm(std::size_t(g.size()));
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    QuadratureGrid p = g;
    for (Index q = 0; q < g.size(); ++q)
    {
        p.directions.col(q) = g.directions.col(perm[std::size_t(q)]);
        p.weights(q) = g.weights(perm[std::size_t(q)]);
    }
    const Eigen::VectorXcd Tp = translation_operator(6, 20.0, X, p);
    for (Index q = 0; q < g.size(); ++q)
        CHECK(std::abs(Tp(q) - T(perm[std::size_t(q)])) < 1e-14 * std::abs(T(perm[std::size_t(q)])));
    // rotating X and the grid together leaves the values unchanged
    const Eigen::Matrix3d R = Eigen::AngleAxisd(0.7, Vec3(1, 1, 0).normalized()).toRotationMatrix();
    QuadratureGrid rot = g;
    rot.directions = R * g.directions;
    CHECK((translation_operator(6, 20.0, R * X, rot) - T).cwiseAbs().maxCoeff() < 1e-12 * T.cwiseAbs().maxCoeff());
}

TEST_CASE("gegenbauer oracle")
{
    for (double kX : {30.0, 100.0})
        for (double ratio : {0.1, 0.3, 0.5})
        {
            INFO("kX=" << kX << " ratio=" << ratio);
            CHECK(gegenbauer_error(kX, ratio, 4.0) <= 1e-3);
        }
}

TEST_CASE("gegenbauer error shrinks with the order")
{
    const double kX = 60.0, ratio = 0.3, k = 1.0;
    const Vec3 X = kX * Vec3(0, 0, 1), d = ratio * kX * Vec3(1, 0, 1).normalized();
    const cplx exact = scalar_green(k, X + d, Vec3::Zero());
    const int L_lo = int(std::ceil(k * d.norm())), L_hi = select_order(k, 2 * d.norm(), 4.0);
    double previous = 1e300;
    for (int L = L_lo; L <= L_hi; L += 2)
    {
        const auto g = sphere_quadrature(L);
        const Eigen::VectorXcd T = translation_operator(L, k, X, g);
        cplx sum = 0.0;
        for (Index q = 0; q < g.size(); ++q)
            sum += g.weights(q) * T(q) * std::exp(-j_unit * (k * g.directions.col(q).dot(d)));
        const double err = std::abs((-j_unit * k / (4 * pi)) * sum / (4 * pi) - exact) / std::abs(exact);
        INFO("L=" << L);
        CHECK(err <= 1.5 * previous);
        previous = std::min(previous, err);
    }
    CHECK(previous <= 1e-3);
}

TEST_CASE("point source spectrum reproduces the dipole")
{
    const double f = 8e9, k = wavenumber(f);
    const Vec3 c(0.01, -0.02, 0.0);
    const SourceRegion region{c, 0.05, SourceRole::scattered, select_order(k, 0.1, 6.0)};
    const GridPtr grid = make_grid({region});
    const CVec3 p(cplx(0.2, 0.1), cplx(1.0, 0.0), cplx(-0.3, 0.4));
    const Points probes = ScanGrid::xy_plane(Vec3(0, 0, 1), 1.0, 1.0, 5, 5, {}).positions();
    for (const Vec3 &at : {c, Vec3(c + Vec3(0.02, -0.01, 0.03))})
    {
        const PlaneWaveSpectrum s{region, f, grid, point_source_spectrum(*grid, k, c, at, p)};
        CHECK(s.transversality_defect() < 1e-12);
        const Eigen::MatrixXcd E = forward_field({s}, probes, {Component::x, Component::y, Component::z});
        for (Index m = 0; m < probes.cols(); ++m)
        {
            const CVec3 ref = dipole_field(k, at, p, probes.col(m));
            CHECK((E.row(m).transpose() - ref).norm() <= 1e-3 * ref.norm());
        }
    }
}

TEST_CASE("forward field linearity and superposition")
{
    const Setup s = desk_setup();
    const PlaneWaveOperator op(s.regions, s.grid, s.f, s.probes, {Component::x, Component::y});
    const auto x = random_spectra(op, 1), y = random_spectra(op, 2);
    const cplx a(0.3, -1.1), b(-2.0, 0.5);
    std::vector<CField> combo = x;
    for (std::size_t r = 0; r < combo.size(); ++r)
        combo[r] = a * x[r] + b * y[r];
    const Eigen::MatrixXcd lhs = op.apply(combo), rhs = a * op.apply(x) + b * op.apply(y);
    CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());

    CHECK(op.apply(op.zero_spectra()).norm() == 0.0);

    // two regions equal the sum of single-region evaluations
    std::vector<PlaneWaveSpectrum> both, first, second;
    for (std::size_t r = 0; r < 2; ++r)
        both.push_back({s.regions[r], s.f, s.grid, x[r]});
    first.push_back(both[0]);
    second.push_back(both[1]);
    const std::vector<Component> comps{Component::x, Component::y};
    const Eigen::MatrixXcd sum = forward_field(first, s.probes, comps) + forward_field(second, s.probes, comps);
    CHECK((forward_field(both, s.probes, comps) - sum).norm() <= 1e-13 * sum.norm());
    CHECK((forward_field(both, s.probes, comps) - op.apply(x)).norm() <= 1e-13 * sum.norm());
}

TEST_CASE("adjoint identity in the weighted inner product")
{
    const Setup s = desk_setup();
    for (const std::vector<Component> &comps : {std::vector{Component::x, Component::y}, std::vector{Component::y},
                                                 std::vector{Component::x, Component::y, Component::z}})
    {
        const PlaneWaveOperator op(s.regions, s.grid, s.f, s.probes, comps);
        for (std::uint64_t seed : {1u, 2u, 3u})
        {
            const auto x = random_spectra(op, seed);
            const Eigen::MatrixXcd y = probe_data(op.n_probes(), op.n_components(), seed);
            const Eigen::MatrixXcd Ax = op.apply(x);
            const cplx lhs = (y.conjugate().cwiseProduct(Ax)).sum(); // <Ax, y> with y conjugated on the left
            const cplx rhs = op.dot(op.adjoint(y), x);
            CHECK(std::abs(lhs - rhs) <= 1e-10 * Ax.norm() * y.norm());
        }
        CHECK(op.adjoint_defect(7) <= 1e-10);
    }
}

TEST_CASE("adjoint output is transverse")
{
    const Setup s = desk_setup();
    const PlaneWaveOperator op(s.regions, s.grid, s.f, s.probes, {Component::x, Component::y});
    const auto spectra = adjoint_field(probe_data(op.n_probes(), 2, 5), s.regions, s.grid, s.f, s.probes,
                                       {Component::x, Component::y});
    REQUIRE(spectra.size() == 2);
    for (const auto &sp : spectra)
        CHECK(sp.transversality_defect() <= 1e-12);
}

TEST_CASE("single probe adjoint is the conjugated kernel row")
{
    const double f = 5e9, k = wavenumber(f);
    const SourceRegion region{Vec3::Zero(), 0.05, SourceRole::scattered, 8};
    const GridPtr grid = make_grid({region});
    Points probe(3, 1);
    probe.col(0) = Vec3(0.1, 0.2, 0.9);
    const PlaneWaveOperator op({region}, grid, f, probe, {Component::y});
    const auto ad = op.adjoint(Eigen::MatrixXcd::Ones(1, 1));
    const Eigen::VectorXcd T = translation_operator(8, k, probe.col(0), *grid);
    // A x = (-j/4pi) sum_q w_q T_q (P_q x_q)_y, so A* e = (j/4pi) conj(T_q) P_q e_y in the weighted product
    for (Index q = 0; q < grid->size(); ++q)
    {
        const Vec3 u = grid->directions.col(q);
        const Vec3 Py = Vec3::UnitY() - u * u.y();
        const CVec3 expect = (j_unit / (4 * pi)) * std::conj(T(q)) * Py.cast<cplx>();
        CHECK((ad[0].col(q) - expect).norm() <= 1e-12 * std::max(expect.norm(), 1e-30));
    }
}

TEST_CASE("validity and configuration errors")
{
    Setup s = desk_setup();
    Points inside = s.probes;
    inside.col(3) = Vec3(0.01, 0.0, 0.02);
    try
    {
        PlaneWaveOperator op(s.regions, s.grid, s.f, inside, {Component::x});
        FAIL("expected validity error");
    }
    catch (const Error &e)
    {
        CHECK(e.kind() == ErrorKind::validity);
        CHECK(std::string(e.what()).find("probe 3") != std::string::npos);
    }
    std::vector<SourceRegion> too_high = s.regions;
    too_high[0].order = s.grid->band_limit + 1;
    CHECK_THROWS_AS(PlaneWaveOperator(too_high, s.grid, s.f, s.probes, {Component::x}), Error);
}

TEST_CASE("spectrum validation")
{
    const Setup s = desk_setup();
    PlaneWaveSpectrum sp{s.regions[0], s.f, s.grid, CField::Zero(3, s.grid->size())};
    CHECK_NOTHROW(sp.validate());
    sp.samples.col(0) = s.grid->directions.col(0).cast<cplx>();
    CHECK(sp.transversality_defect() == doctest::Approx(1.0));
    CHECK_THROWS_AS(sp.validate(), Error);
}

TEST_CASE("operator shape on the desk setup")
{
    const Setup s = desk_setup(40);
    const PlaneWaveOperator op(s.regions, s.grid, s.f, s.probes, {Component::x, Component::y});
    CHECK(op.n_probes() == 1600);
    CHECK(op.n_components() == 2);
    const auto x = op.zero_spectra();
    CHECK(x.size() == 2);
    CHECK(x[0].rows() == 3);
    CHECK(x[0].cols() == s.grid->size());
    CHECK(op.apply(x).rows() == 1600);
    CHECK(op.apply(x).cols() == 2);
}
