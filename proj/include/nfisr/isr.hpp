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

#ifndef NFISR_ISR_HPP
#define NFISR_ISR_HPP

#include "nfisr/em_forward.hpp"
#include "nfisr/pws.hpp"

#include <map>
#include <string>
#include <vector>

namespace nfisr
{
    struct NormalizationConfig
    {
        Component component = Component::y; // reference component p
        double min_ref_magnitude = 1e-6;    // guard, relative to the median reference magnitude; in (0, 1]

        void validate() const;
    };

    struct SolverConfig
    {
        int max_iterations = 500;
        double relative_residual_target = 1e-3; // early stopping is the only regularization
        int report_every = 0;                   // print "iteration residual" lines to stderr every n steps, 0 = silent
        double order_digits = 3.0;              // accuracy digits for regions with order <= 0 (auto)
        double stagnation_tolerance = 1e-12;    // minimum relative residual decrease ...
        int stagnation_window = 10;             // ... over this many iterations
        double adjoint_gate = 1e-8;             // refuse to solve when the adjoint self-check exceeds this

        void validate() const;
    };

    // Divides every probe sample of capture (m, f) by the reference sample of the same capture.
    // The result has ref == 1 and normalized == true. Already normalized input is returned unchanged.
    // - Throws ErrorKind::degenerate_reference listing the (m, f) pairs below the guard
    // - Throws ErrorKind::contract if the dataset's reference component differs from cfg.component
    FieldDataset normalize_by_reference(const FieldDataset &dataset, const NormalizationConfig &cfg);

    // Entrywise difference of two normalized captures of the same grid and frequencies
    // - Throws ErrorKind::incompatible on geometry/frequency/component mismatch
    // - Throws ErrorKind::contract on non-normalized input
    FieldDataset background_subtract(const FieldDataset &target, const FieldDataset &background);

    // Regions with order <= 0 get select_order(k, 2 * radius, digits); explicit orders are kept
    std::vector<SourceRegion> resolve_orders(std::vector<SourceRegion> regions, double frequency_hz, double digits);

    struct SolverDiagnostics
    {
        double frequency = 0.0;
        int iterations = 0;
        std::vector<double> residual_history; // relative residual |Ax_k - b| / |b|, entry 0 is x = 0
        double relative_misfit = 0.0;         // of the returned iterate
        bool converged = false;
        bool stagnated = false;
        double adjoint_defect = 0.0;
        std::string message;
    };

    struct IsrResult
    {
        std::vector<PlaneWaveSpectrum> spectra; // one per region, same order as the input regions
        SolverDiagnostics diagnostics;
    };

    // CG on the normal equations (CGLS) for min |A x - b|, starting from x = 0
    IsrResult solve_least_squares(const PlaneWaveOperator &op, const Eigen::MatrixXcd &data, const SolverConfig &cfg);

    // Inverse source reconstruction at one frequency of a normalized dataset.
    // Background-subtracted data may only use scattered-role regions; otherwise an incident-role
    // (transmitter) region is required.
    // - Throws ErrorKind::contract for non-normalized input or a wrong region set
    // - Throws ErrorKind::config if the operator fails its adjoint self-check
    IsrResult solve_isr(const FieldDataset &observations, const std::vector<SourceRegion> &regions, const SolverConfig &cfg,
                        double frequency_hz);

    struct FrequencyFailure
    {
        double frequency = 0.0;
        std::string message;
    };

    struct MultiFrequencyResult
    {
        std::map<double, IsrResult> solutions; // keyed by frequency in Hz
        std::vector<FrequencyFailure> failures;
    };

    // Independent solve_isr per frequency; a failing frequency is reported without aborting the rest
    MultiFrequencyResult solve_all_frequencies(const FieldDataset &observations, const std::vector<SourceRegion> &regions,
                                               const SolverConfig &cfg);
}

#endif // NFISR_ISR_HPP
