// SPDX-License-Identifier: Apache-2.0
//
// ris-sostat: second-order statistics of RIS-assisted fading channels
// Copyright (C) 2026 The ris-sostat authors
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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ris_sostat
{

// Argument outside the mathematical domain of an operation.
struct domain_error : std::domain_error
{
    using std::domain_error::domain_error;
};

// Iteration or quadrature failed to reach its tolerance.
struct numeric_error : std::runtime_error
{
    std::size_t terms = 0;
    double achieved = 0.0;

    numeric_error(const std::string &what, std::size_t terms_used = 0, double achieved_tol = 0.0)
        : std::runtime_error(what), terms(terms_used), achieved(achieved_tol) {}
};

// Closed form is known to be unusable for this input (near-degenerate eigenvalues).
struct precision_error : numeric_error
{
    using numeric_error::numeric_error;
};

// A constructed correlation or covariance matrix violates its invariants.
struct model_error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

// Scenario has no randomness where a normalisation needs it (zero variance).
struct degenerate_error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

// Bad command line, bad scenario file, or an invalid kind/mode combination.
struct usage_error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

} // namespace ris_sostat
