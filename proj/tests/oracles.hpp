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

// Reference values computed by routes that share no code with the library:
// long-double power series, integral representations under adaptive
// quadrature, and closed forms for special cases.

#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle
{

using ld = long double;
inline constexpr ld pi_l = std::numbers::pi_v<long double>;

// Plain Gauss series, many terms, long double.
inline ld hyp2f1_series(ld a, ld b, ld c, ld z, long terms = 4000000)
{
    ld term = 1.0L, sum = 1.0L;
    for (long n = 0; n < terms; ++n)
    {
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0L)) * z;
        sum += term;
        if (std::fabs(term) < 1e-22L * std::fabs(sum) && n > 10)
            break;
    }
    return sum;
}

// 2F1(1/2, 1/2; 2; z) = (4/pi) int_0^{pi/2} cos^2 p (1 - z sin^2 p)^{-1/2} dp
inline double hyp2f1_half_half_two(double z)
{
    boost::math::quadrature::tanh_sinh<double> ts;
    const double v = ts.integrate(
        [z](double p) {
            const double s = std::sin(p), c = std::cos(p);
            return c * c / std::sqrt(c * c + (1.0 - z) * s * s); // 1 - z sin^2 without cancellation
        },
        0.0, std::numbers::pi / 2.0);
    return 4.0 / std::numbers::pi * v;
}

// Euler integral for b > a > 0
inline double hyp1f1_euler(double a, double b, double z)
{
    boost::math::quadrature::tanh_sinh<double> ts;
    const double pref = std::exp(std::lgamma(b) - std::lgamma(a) - std::lgamma(b - a));
    const double v = ts.integrate(
        [=](double t, double tc) {
            // tc = 1 - t, kept exact near the right endpoint
            const double one_minus = (t < 0.5) ? 1.0 - t : tc;
            return std::exp(z * t) * std::pow(t, a - 1.0) * std::pow(one_minus, b - a - 1.0);
        },
        0.0, 1.0);
    return pref * v;
}

inline double elliptic_k_quad(double k)
{
    boost::math::quadrature::tanh_sinh<double> ts;
    return ts.integrate([k](double p) { return 1.0 / std::sqrt(1.0 - k * k * std::sin(p) * std::sin(p)); }, 0.0,
                        std::numbers::pi / 2.0);
}

inline double elliptic_e_quad(double k)
{
    boost::math::quadrature::gauss_kronrod<double, 61> gk;
    return gk.integrate([k](double p) { return std::sqrt(1.0 - k * k * std::sin(p) * std::sin(p)); }, 0.0,
                        std::numbers::pi / 2.0, 15, 1e-15);
}

// J0(x) = (1/pi) int_0^pi cos(x sin t) dt; the trapezoid rule is spectrally accurate here
inline double bessel_j0_trap(double x, int n = 400)
{
    ld s = 0.0L;
    for (int i = 0; i < n; ++i)
    {
        const ld t = (i + 0.5L) * pi_l / n;
        s += std::cos(x * std::sin(t));
    }
    return static_cast<double>(s / n);
}

// P(a, x) = x^a e^-x sum x^n / Gamma(a + n + 1)
inline double gamma_p_series(double a, double x)
{
    const ld la = a, lx = x;
    ld term = 1.0L / std::tgamma(la + 1.0L), sum = term;
    for (int n = 1; n < 100000; ++n)
    {
        term *= lx / (la + n);
        sum += term;
        if (term < 1e-24L * sum)
            break;
    }
    return static_cast<double>(std::exp(la * std::log(lx) - lx) * sum);
}

// Hypoexponential CDF for distinct rates.
inline double hypoexp_cdf(const std::vector<double> &theta, double T)
{
    ld F = 1.0L;
    for (std::size_t i = 0; i < theta.size(); ++i)
    {
        ld p = 1.0L;
        for (std::size_t j = 0; j < theta.size(); ++j)
            if (j != i)
                p *= static_cast<ld>(theta[i]) / (static_cast<ld>(theta[i]) - theta[j]);
        F -= p * std::exp(-static_cast<ld>(T) / theta[i]);
    }
    return static_cast<double>(F);
}

// LCR = sqrt(2 pi) f E[sqrt(W) delta(X - T)] with X = sum th_i e_i, W = sum th_i^2 e_i,
// e_i ~ Exp(1), integrated directly over the simplex X = T. Two or three branches.
inline double lcr_quadrature(const std::vector<double> &th, double f, double T)
{
    boost::math::quadrature::gauss_kronrod<double, 31> gk;
    const double c = std::sqrt(2.0 * std::numbers::pi) * f;
    if (th.size() == 2)
    {
        auto g = [&](double e1) {
            const double e2 = (T - th[0] * e1) / th[1];
            return std::exp(-e1 - e2) * std::sqrt(th[0] * th[0] * e1 + th[1] * th[1] * e2) / th[1];
        };
        return c * gk.integrate(g, 0.0, T / th[0], 12, 1e-13);
    }
    auto outer = [&](double e1) {
        const double rest = T - th[0] * e1;
        auto inner = [&](double e2) {
            const double e3 = std::max(0.0, (rest - th[1] * e2) / th[2]);
            return std::exp(-e1 - e2 - e3) * std::sqrt(th[0] * th[0] * e1 + th[1] * th[1] * e2 + th[2] * th[2] * e3) /
                   th[2];
        };
        return gk.integrate(inner, 0.0, rest / th[1], 10, 1e-13);
    };
    return c * gk.integrate(outer, 0.0, T / th[0], 10, 1e-13);
}

// E[r1 r2] for unit-power Rayleigh amplitudes with squared correlation k,
// from the bivariate Rayleigh density.
inline double rayleigh_cross_moment(double k)
{
    boost::math::quadrature::gauss_kronrod<double, 31> gk;
    const double q = 1.0 - k;
    auto outer = [&](double r1) {
        auto inner = [&](double r2) {
            const double x = 2.0 * std::sqrt(k) * r1 * r2 / q;
            // I0(x) e^{-x} kept finite for large x
            const double i0s = x < 600.0 ? std::cyl_bessel_i(0.0, x) * std::exp(-x)
                                         : (1.0 + 1.0 / (8.0 * x) + 9.0 / (128.0 * x * x)) /
                                               std::sqrt(2.0 * std::numbers::pi * x);
            return r1 * r2 * 4.0 * r1 * r2 / q * std::exp(-(r1 * r1 + r2 * r2) / q + x) * i0s;
        };
        return gk.integrate(inner, 0.0, 9.0, 10, 1e-13);
    };
    return gk.integrate(outer, 0.0, 9.0, 10, 1e-13);
}

} // namespace oracle
