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

#include "nfisr/isr.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace nfisr
{
    namespace
    {
        void axpy(cplx a, const std::vector<CField> &x, std::vector<CField> &y)
        {
            for (std::size_t r = 0; r < x.size(); ++r)
                y[r] += a * x[r];
        }

        Index frequency_index(const FieldDataset &ds, double frequency_hz)
        {
            for (std::size_t i = 0; i < ds.frequencies.size(); ++i)
                if (std::abs(ds.frequencies[i] - frequency_hz) <= 1e-9 * frequency_hz)
                    return Index(i);
            throw Error(ErrorKind::contract, "frequency " + std::to_string(frequency_hz) + " Hz not in dataset");
        }

        bool same_layout(const FieldDataset &a, const FieldDataset &b)
        {
            if (a.frequencies != b.frequencies || a.components != b.components)
                return false;
            if (a.probe_positions.cols() != b.probe_positions.cols())
                return false;
            return (a.probe_positions - b.probe_positions).cwiseAbs().maxCoeff() <= 1e-12;
        }
    }

    void NormalizationConfig::validate() const
    {
        if (!(min_ref_magnitude > 0.0 && min_ref_magnitude <= 1.0))
            throw Error(ErrorKind::config, "normalization guard must lie in (0, 1]");
    }

    void SolverConfig::validate() const
    {
        if (max_iterations < 1)
            throw Error(ErrorKind::config, "max_iterations must be at least 1");
        if (!(relative_residual_target > 0.0 && relative_residual_target < 1.0))
            throw Error(ErrorKind::config, "relative residual target must lie in (0, 1)");
        if (!(order_digits >= 1.0 && order_digits <= 10.0))
            throw Error(ErrorKind::config, "order digits must lie in [1, 10]");
        if (stagnation_window < 1)
            throw Error(ErrorKind::config, "stagnation window must be at least 1");
    }

    FieldDataset normalize_by_reference(const FieldDataset &dataset, const NormalizationConfig &cfg)
    {
        cfg.validate();
        dataset.validate();
        if (dataset.ref_component != cfg.component)
            throw Error(ErrorKind::contract, std::string("reference channel records component ") +
                                                 component_name(dataset.ref_component) + ", normalization asks for " +
                                                 component_name(cfg.component));
        if (dataset.normalized)
            return dataset;

        const Index M = dataset.n_probes(), F = dataset.n_frequencies();
        std::vector<double> mags(std::size_t(M * F));
        for (Index i = 0; i < M * F; ++i)
            mags[std::size_t(i)] = std::abs(dataset.ref.data()[i]);
        std::nth_element(mags.begin(), mags.begin() + std::ptrdiff_t(mags.size() / 2), mags.end());
        const double median = mags.empty() ? 0.0 : mags[mags.size() / 2];
        const double guard = cfg.min_ref_magnitude * median;

        std::vector<std::pair<Index, Index>> weak;
        for (Index f = 0; f < F; ++f)
            for (Index m = 0; m < M; ++m)
                if (!(std::abs(dataset.ref(m, f)) > guard))
                    weak.emplace_back(m, f);
        if (!weak.empty())
        {
            std::ostringstream msg;
            msg << weak.size() << " reference samples below guard " << guard << " (check reference antenna placement):";
            for (std::size_t i = 0; i < std::min<std::size_t>(weak.size(), 10); ++i)
                msg << " (m=" << weak[i].first << ", f=" << weak[i].second << ")";
            if (weak.size() > 10)
                msg << " ...";
            throw Error(ErrorKind::degenerate_reference, msg.str());
        }

        FieldDataset out = dataset;
        for (Index f = 0; f < F; ++f)
            for (Index m = 0; m < M; ++m)
                out.probe[std::size_t(f)].row(m) /= dataset.ref(m, f);
        out.ref.setOnes();
        out.normalized = true;
        return out;
    }

    FieldDataset background_subtract(const FieldDataset &target, const FieldDataset &background)
    {
        if (!target.normalized || !background.normalized)
            throw Error(ErrorKind::contract, "background subtraction expects normalized datasets");
        if (!same_layout(target, background))
            throw Error(ErrorKind::incompatible, "target and background differ in probes, frequencies or components");
        FieldDataset out = target;
        for (std::size_t f = 0; f < out.probe.size(); ++f)
            out.probe[f] -= background.probe[f];
        out.background_subtracted = true;
        return out;
    }

    std::vector<SourceRegion> resolve_orders(std::vector<SourceRegion> regions, double frequency_hz, double digits)
    {
        const double k = wavenumber(frequency_hz);
        for (auto &r : regions)
            if (r.order <= 0)
                r.order = select_order(k, 2.0 * r.radius, digits);
        return regions;
    }

    IsrResult solve_least_squares(const PlaneWaveOperator &op, const Eigen::MatrixXcd &data, const SolverConfig &cfg)
    {
        cfg.validate();
        if (!data.allFinite())
            throw Error(ErrorKind::contract, "observations contain non-finite samples");

        IsrResult result;
        auto &diag = result.diagnostics;
        diag.frequency = op.frequency();

        std::vector<CField> x = op.zero_spectra();
        const double b_norm = data.norm();
        const auto finish = [&](const std::vector<CField> &best)
        {
            for (std::size_t r = 0; r < best.size(); ++r)
                result.spectra.push_back({op.regions()[r], op.frequency(), op.grid(), best[r]});
            return result;
        };

        diag.residual_history.push_back(b_norm > 0.0 ? 1.0 : 0.0);
        if (b_norm == 0.0)
        {
            diag.converged = true;
            diag.message = "zero observations";
            return finish(x);
        }

        Eigen::MatrixXcd r = data;
        std::vector<CField> s = op.adjoint(r);
        std::vector<CField> p = s;
        double gamma = op.dot(s, s).real();
        double residual = 1.0;

        for (int it = 1; it <= cfg.max_iterations; ++it)
        {
            const Eigen::MatrixXcd q = op.apply(p);
            const double q_norm2 = q.squaredNorm();
            if (!(q_norm2 > 0.0) || !(gamma > 0.0))
            {
                diag.stagnated = true;
                diag.message = "search direction vanished";
                break;
            }
            const double alpha = gamma / q_norm2;
            axpy(alpha, p, x);
            r -= alpha * q;
            residual = r.norm() / b_norm;
            diag.residual_history.push_back(residual);
            diag.iterations = it;
            if (cfg.report_every > 0 && it % cfg.report_every == 0)
                std::fprintf(stderr, "%d %.6e\n", it, residual);

            if (residual <= cfg.relative_residual_target)
            {
                diag.converged = true;
                break;
            }
            const auto &h = diag.residual_history;
            if (it >= cfg.stagnation_window &&
                h[h.size() - 1 - std::size_t(cfg.stagnation_window)] - residual < cfg.stagnation_tolerance)
            {
                diag.stagnated = true;
                diag.message = "residual decrease below " + std::to_string(cfg.stagnation_tolerance) + " over " +
                               std::to_string(cfg.stagnation_window) + " iterations";
                break;
            }

            s = op.adjoint(r);
            const double gamma_next = op.dot(s, s).real();
            const double beta = gamma_next / gamma;
            gamma = gamma_next;
            for (std::size_t k = 0; k < p.size(); ++k)
                p[k] = s[k] + beta * p[k];
        }
        // CGLS residuals are non-increasing, so the last iterate is the best one
        diag.relative_misfit = residual;
        if (diag.message.empty())
            diag.message = diag.converged ? "target reached" : "iteration limit reached";
        return finish(x);
    }

    IsrResult solve_isr(const FieldDataset &observations, const std::vector<SourceRegion> &regions, const SolverConfig &cfg,
                        double frequency_hz)
    {
        cfg.validate();
        if (!observations.normalized)
            throw Error(ErrorKind::contract, "solve_isr expects reference-normalized observations");
        if (regions.empty())
            throw Error(ErrorKind::contract, "solve_isr needs at least one source region");
        const bool has_incident = std::any_of(regions.begin(), regions.end(),
                                              [](const SourceRegion &r) { return r.role == SourceRole::incident; });
        if (observations.background_subtracted && has_incident)
            throw Error(ErrorKind::contract, "background-subtracted data cannot carry an incident (transmitter) region");
        if (!observations.background_subtracted && !has_incident)
            throw Error(ErrorKind::contract, "data without background subtraction needs an incident (transmitter) region");

        const Index f = frequency_index(observations, frequency_hz);
        std::vector<SourceRegion> resolved = resolve_orders(regions, frequency_hz, cfg.order_digits);
        GridPtr grid = make_grid(resolved);
        const PlaneWaveOperator op(std::move(resolved), std::move(grid), frequency_hz, observations.probe_positions,
                                   observations.components);

        const double defect = op.adjoint_defect(0x5eed);
        if (!(defect <= cfg.adjoint_gate))
            throw Error(ErrorKind::config, "adjoint self-check failed with defect " + std::to_string(defect));

        IsrResult result = solve_least_squares(op, observations.probe[std::size_t(f)], cfg);
        result.diagnostics.adjoint_defect = defect;
        return result;
    }

    MultiFrequencyResult solve_all_frequencies(const FieldDataset &observations, const std::vector<SourceRegion> &regions,
                                               const SolverConfig &cfg)
    {
        MultiFrequencyResult out;
        for (double f : observations.frequencies)
        {
            try
            {
                out.solutions.emplace(f, solve_isr(observations, regions, cfg, f));
            }
            catch (const Error &e)
            {
                out.failures.push_back({f, e.what()});
            }
        }
        return out;
    }
}
