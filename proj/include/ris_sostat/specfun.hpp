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

#include "errors.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

namespace ris_sostat::specfun
{

struct SpecTolerance
{
    double abs_tol = 1e-12;
    int max_terms = 10000;
};

inline void check_tolerance(const SpecTolerance &tol)
{
    if (!(tol.abs_tol > 0.0) || tol.max_terms < 1)
        throw domain_error("SpecTolerance: abs_tol must be > 0 and max_terms >= 1");
}

inline double bessel_j0(double x)
{
    if (!std::isfinite(x))
        throw domain_error("bessel_j0: non-finite argument");
    return std::cyl_bessel_j(0.0, std::fabs(x));
}

inline double gamma_complete(double x)
{
    if (!(x > 0.0) || !std::isfinite(x))
        throw domain_error("gamma_complete: argument must be positive and finite");
    return std::tgamma(x);
}

// P(r, x) = gamma(r, x) / Gamma(r)
inline double reg_lower_incomplete_gamma(double r, double x)
{
    if (!(r > 0.0) || !std::isfinite(r) || !(x >= 0.0))
        throw domain_error("reg_lower_incomplete_gamma: need r > 0 and x >= 0");
    if (x == 0.0)
        return 0.0;
    if (std::isinf(x))
        return 1.0;
    return boost::math::gamma_p(r, x);
}

inline double sinc(double x)
{
    if (x == 0.0)
        return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

namespace detail
{
// Complete elliptic integrals from the arithmetic-geometric mean, given the
// modulus k and its complement kp = sqrt(1 - k^2) (passed separately so that
// callers holding 1 - k^2 exactly do not lose digits near k = 1).
inline std::pair<double, double> agm_ke(double k, double kp)
{
    if (kp == 0.0)
        return {std::numeric_limits<double>::infinity(), 1.0};
    double a = 1.0, g = kp;
    double sum = 0.5 * k * k;
    double pow2 = 0.5;
    for (int n = 0; n < 64; ++n)
    {
        const double c = 0.5 * (a - g);
        if (std::fabs(c) < 1e-17 * a)
            break;
        const double an = 0.5 * (a + g);
        g = std::sqrt(a * g);
        a = an;
        pow2 *= 2.0;
        sum += pow2 * c * c;
    }
    const double K = std::numbers::pi / (2.0 * a);
    return {K, K * (1.0 - sum)};
}
} // namespace detail

inline double elliptic_k(double k)
{
    if (!(k >= 0.0 && k <= 1.0))
        throw domain_error("elliptic_k: modulus must lie in [0, 1]");
    return detail::agm_ke(k, std::sqrt((1.0 - k) * (1.0 + k))).first;
}

inline double elliptic_e(double k)
{
    if (!(k >= 0.0 && k <= 1.0))
        throw domain_error("elliptic_e: modulus must lie in [0, 1]");
    return detail::agm_ke(k, std::sqrt((1.0 - k) * (1.0 + k))).second;
}

// E(k) - (1 - k^2) K(k), with the k = 1 endpoint returned as exactly 1.
inline double elliptic_ek_combo(double k)
{
    if (!(k >= 0.0 && k <= 1.0))
        throw domain_error("elliptic_ek_combo: modulus must lie in [0, 1]");
    if (k == 1.0)
        return 1.0;
    const double kp2 = (1.0 - k) * (1.0 + k);
    auto [K, E] = detail::agm_ke(k, std::sqrt(kp2));
    return E - kp2 * K;
}

inline double hyp2f1(double a, double b, double c, double z, const SpecTolerance &tol = {})
{
    check_tolerance(tol);
    if (c <= 0.0 && c == std::floor(c))
        throw domain_error("hyp2f1: c must not be a nonpositive integer");
    if (!(z >= 0.0 && z <= 1.0))
        throw domain_error("hyp2f1: z must lie in [0, 1]");
    if (z == 0.0)
        return 1.0;

    if (z == 1.0)
    {
        if (!(c - a - b > 0.0))
            throw domain_error("hyp2f1: series diverges at z = 1 unless c - a - b > 0");
        // Gauss summation; 1/Gamma of a nonpositive integer is zero
        auto rgamma = [](double x) {
            if (x <= 0.0 && x == std::floor(x))
                return 0.0;
            return 1.0 / std::tgamma(x);
        };
        return std::tgamma(c) * std::tgamma(c - a - b) * rgamma(c - a) * rgamma(c - b);
    }

    // the two families used by the amplitude moments converge slowly near
    // z = 1, both have elliptic closed forms
    if (z > 0.5 && c == 1.0 && a == -0.5 && b == -0.5)
    {
        const double k = std::sqrt(z);
        auto [K, E] = detail::agm_ke(k, std::sqrt(1.0 - z));
        return (2.0 / std::numbers::pi) * (2.0 * E - (1.0 - z) * K);
    }
    if (z > 0.5 && c == 2.0 && a == 0.5 && b == 0.5)
    {
        const double k = std::sqrt(z);
        auto [K, E] = detail::agm_ke(k, std::sqrt(1.0 - z));
        return 4.0 * (E - (1.0 - z) * K) / (std::numbers::pi * z);
    }

    double term = 1.0, sum = 1.0;
    for (int n = 0; n < tol.max_terms; ++n)
    {
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z;
        sum += term;
        if (term == 0.0)
            return sum;
        const double ratio = std::fabs((a + n + 1) * (b + n + 1) / ((c + n + 1) * (n + 2.0)) * z);
        if (ratio < 1.0 && std::fabs(term) * ratio / (1.0 - ratio) < tol.abs_tol)
            return sum;
    }
    throw numeric_error("hyp2f1: Gauss series did not converge within " +
                            std::to_string(tol.max_terms) + " terms",
                        static_cast<std::size_t>(tol.max_terms));
}

namespace detail
{
inline double hyp1f1_series(double a, double b, double z, const SpecTolerance &tol, double scale)
{
    double term = scale, sum = scale;
    for (int n = 0; n < tol.max_terms; ++n)
    {
        term *= (a + n) / ((b + n) * (n + 1.0)) * z;
        sum += term;
        // past the peak the terms shrink at least geometrically
        const double ratio = std::fabs((a + n + 1) / ((b + n + 1) * (n + 2.0)) * z);
        if (ratio < 0.5 && std::fabs(term) < tol.abs_tol * std::max(1.0, std::fabs(sum)) * 1e-3)
            return sum;
        if (term == 0.0)
            return sum;
    }
    throw numeric_error("hyp1f1: series did not converge within " + std::to_string(tol.max_terms) + " terms",
                        static_cast<std::size_t>(tol.max_terms));
}
} // namespace detail

inline double hyp1f1(double a, double b, double z, const SpecTolerance &tol = {})
{
    check_tolerance(tol);
    if (b <= 0.0 && b == std::floor(b))
        throw domain_error("hyp1f1: b must not be a nonpositive integer");
    if (!std::isfinite(z) || !std::isfinite(a) || !std::isfinite(b))
        throw domain_error("hyp1f1: non-finite argument");
    if (z == 0.0)
        return 1.0;
    if (z > 0.0)
        return detail::hyp1f1_series(a, b, z, tol, 1.0);

    const double x = -z;
    if (x > 600.0)
    {
        // large negative argument: the algebraic asymptotic series, the
        // exponentially small companion is below double resolution
        const double bma = b - a;
        if (bma <= 0.0 && bma == std::floor(bma))
            throw numeric_error("hyp1f1: asymptotic series undefined for integer b - a <= 0");
        double term = 1.0, sum = 1.0;
        for (int n = 0; n < 200; ++n)
        {
            const double next = term * (a + n) * (a - b + 1 + n) / ((n + 1.0) * x);
            if (std::fabs(next) > std::fabs(term))
                break;
            term = next;
            sum += term;
            if (std::fabs(term) < 1e-17 * std::fabs(sum))
                break;
        }
        const double sign = (bma > 0.0 || std::tgamma(bma) > 0.0) ? 1.0 : -1.0;
        return sign * std::exp(std::lgamma(b) - std::lgamma(bma) - a * std::log(x)) * sum;
    }
    // Kummer: 1F1(a,b;z) = e^z 1F1(b-a,b;-z), scale folded into the first term
    return detail::hyp1f1_series(b - a, b, x, tol, std::exp(z));
}

} // namespace ris_sostat::specfun
