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

#include "channel.hpp"
#include "errors.hpp"
#include "specfun.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace ris_sostat
{

// A scenario together with its deterministic link ingredients.
struct System
{
    ScenarioConfig cfg;
    Links links;
};

inline System make_system(const ScenarioConfig &cfg)
{
    return System{cfg, build_links(cfg)};
}

// ------------------------------------------------------------------------
// Direct link

struct EigenSpectrum
{
    std::vector<double> theta; // descending, strictly positive
    int dropped = 0;           // zero eigenvalues removed

    double mean() const
    {
        double s = 0.0;
        for (double t : theta)
            s += t;
        return s;
    }
};

inline EigenSpectrum make_spectrum(std::vector<double> values)
{
    EigenSpectrum s;
    double vmax = 0.0;
    for (double v : values)
        vmax = std::max(vmax, v);
    if (!(vmax > 0.0))
        throw domain_error("make_spectrum: no positive eigenvalue");
    for (double v : values)
    {
        if (v > 1e-12 * vmax)
            s.theta.push_back(v);
        else if (v < -1e-10 * vmax)
            throw model_error("make_spectrum: negative eigenvalue");
        else
            ++s.dropped;
    }
    std::sort(s.theta.begin(), s.theta.end(), std::greater<>());
    return s;
}

// Eigenvalues of (E_s / sigma^2) beta_d R_d.
inline EigenSpectrum direct_spectrum(const System &sys)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> es(sys.links.R_d, Eigen::EigenvaluesOnly);
    const double scale = sys.cfg.tx_snr * sys.links.gains.beta_d;
    std::vector<double> v(es.eigenvalues().size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = scale * es.eigenvalues()(static_cast<Eigen::Index>(i));
    return make_spectrum(v);
}

// Distinct values with multiplicities.
struct ReducedSpectrum
{
    std::vector<double> theta;
    std::vector<double> mult;
};

inline ReducedSpectrum full_spectrum(const EigenSpectrum &s)
{
    return ReducedSpectrum{s.theta, std::vector<double>(s.theta.size(), 1.0)};
}

// Keep the L leading eigenvalues and replace the rest by their average, trace preserved.
inline ReducedSpectrum reduce_spectrum(const EigenSpectrum &s, int L)
{
    const int M = static_cast<int>(s.theta.size());
    if (L < 1 || L >= M)
        throw domain_error("reduce_spectrum: need 1 <= L < M");
    ReducedSpectrum r;
    for (int i = 0; i < L; ++i)
    {
        r.theta.push_back(s.theta[i]);
        r.mult.push_back(1.0);
    }
    double tail = 0.0;
    for (int i = L; i < M; ++i)
        tail += s.theta[i];
    r.theta.push_back(tail / (M - L));
    r.mult.push_back(static_cast<double>(M - L));
    return r;
}

// Closed form for distinct eigenvalues (hypoexponential SNR with Gaussian slope).
inline double lcr_direct_exact(const EigenSpectrum &s, double f, double T)
{
    const auto &th = s.theta;
    const int M = static_cast<int>(th.size());
    if (M < 1)
        throw domain_error("lcr_direct_exact: empty spectrum");
    if (!(T >= 0.0) || !(f >= 0.0))
        throw domain_error("lcr_direct_exact: need T >= 0 and f >= 0");
    if (M == 1)
        return std::sqrt(2.0 * std::numbers::pi * T / th[0]) * f * std::exp(-T / th[0]);
    for (int i = 0; i < M; ++i)
        for (int j = i + 1; j < M; ++j)
            if (std::fabs(th[i] - th[j]) <= 1e-9 * std::max(th[i], th[j]))
                throw precision_error("lcr_direct_exact: near-degenerate eigenvalues, use lcr_direct_stable");

    double sum = 0.0;
    for (int n = 0; n < M; ++n)
    {
        double inner = 0.0;
        for (int l = 0; l < M; ++l)
        {
            if (l == n)
                continue;
            double p = 1.0;
            for (int m = 0; m < M; ++m)
                if (m != n && m != l)
                    p *= th[l] * th[n] / ((th[l] - th[m]) * (th[n] - th[m]));
            inner += std::sqrt(th[n]) / (th[l] * (th[n] - th[l])) * specfun::hyp1f1(1.0, 2.5, -T / th[l]) * p;
        }
        sum += std::exp(-T / th[n]) * inner;
    }
    return std::sqrt(std::numbers::pi) * std::pow(2.0 * T, 1.5) * f / 3.0 * sum;
}

namespace detail
{

inline cplx log1p_c(cplx z)
{
    const cplx u = 1.0 + z;
    if (u == cplx(1.0, 0.0))
        return z;
    return std::log(u) * (z / (u - 1.0));
}

inline cplx expm1_c(cplx z)
{
    const double x = z.real(), y = z.imag();
    const double sh = std::sin(0.5 * y);
    return {std::expm1(x) * std::cos(y) - 2.0 * sh * sh, std::exp(x) * std::sin(y)};
}

// Root of sum m theta / (1 + s theta) = T on (-1 / theta_max, inf).
inline double cf_saddle(const ReducedSpectrum &r, double T)
{
    double tmax = 0.0;
    for (double t : r.theta)
        tmax = std::max(tmax, t);
    auto g = [&](double s) {
        double v = 0.0;
        for (std::size_t i = 0; i < r.theta.size(); ++i)
            v += r.mult[i] * r.theta[i] / (1.0 + s * r.theta[i]);
        return v - T;
    };
    double lo = -(1.0 - 1e-15) / tmax, hi = 1.0 / tmax;
    while (g(hi) > 0.0)
        hi *= 2.0;
    for (int it = 0; it < 200; ++it)
    {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi)
            break;
        (g(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

struct LcrQuadrature
{
    double inner_step = 0.1, inner_span = 14.0, parabola = 0.25;
    double outer_step = 0.25, outer_span = 40.0;
    double max_rel_err = 1e-6; // allowed gap to the half-resolution rules
};

// LCR = sqrt(2 pi) f E[sqrt(W) delta(X - T)] for X = sum theta_i |g_i|^2,
// W = sum theta_i^2 |g_i|^2. The square root is written as an integral over
// t of (1 - e^{-Wt}) t^{-3/2}, and for each t the joint transform
// prod (1 + p theta_i + t theta_i^2)^{-m_i} is inverted in p along a
// parabolic contour through the saddle point of the density.
inline double lcr_direct_cf(const ReducedSpectrum &r, double f, double T, const LcrQuadrature &q = {})
{
    if (!(T > 0.0))
    {
        if (T == 0.0)
            return 0.0;
        throw domain_error("lcr_direct_cf: negative threshold");
    }
    const std::size_t nth = r.theta.size();
    double tmax = 0.0;
    for (double t : r.theta)
        tmax = std::max(tmax, t);

    const double s0 = detail::cf_saddle(r, T);
    double var = 0.0;
    for (std::size_t i = 0; i < nth; ++i)
    {
        const double tp = r.theta[i] / (1.0 + s0 * r.theta[i]);
        var += r.mult[i] * tp * tp;
    }
    const double sd = std::sqrt(var);

    const int nu = static_cast<int>(std::lround(q.inner_span / q.inner_step));
    std::vector<cplx> z(nu + 1), w(nu + 1);
    const cplx j(0.0, 1.0);
    for (int k = 0; k <= nu; ++k)
    {
        const double u = k * q.inner_step;
        z[k] = s0 + (j * u - q.parabola * u * u) / sd;
        const cplx dz = (j - 2.0 * q.parabola * u) / sd;
        cplx logF = z[k] * T;
        for (std::size_t i = 0; i < nth; ++i)
            logF -= r.mult[i] * std::log(1.0 + z[k] * r.theta[i]);
        // two-sided contour folded onto u >= 0 via the real part
        w[k] = std::exp(logF) * dz * q.inner_step / (2.0 * std::numbers::pi * j) * 2.0;
        if (k == 0)
            w[k] *= 0.5;
    }
    double dens = 0.0, dens_c = 0.0;
    for (int k = 0; k <= nu; ++k)
    {
        dens += w[k].real();
        if (k % 2 == 0)
            dens_c += 2.0 * w[k].real();
    }

    const int nx = static_cast<int>(std::lround(q.outer_span / q.outer_step));
    const double tscale = 1.0 / (tmax * tmax);
    std::vector<cplx> eps(nth * (nu + 1));
    for (int k = 0; k <= nu; ++k)
        for (std::size_t i = 0; i < nth; ++i)
            eps[k * nth + i] = r.theta[i] * r.theta[i] / (1.0 + z[k] * r.theta[i]);

    double acc = 0.0, acc_inner_c = 0.0, acc_outer_c = 0.0;
    for (int ix = -nx; ix <= nx; ++ix)
    {
        const double t = tscale * std::exp(ix * q.outer_step);
        double h = 0.0, hc = 0.0;
        for (int k = 0; k <= nu; ++k)
        {
            cplx S = 0.0;
            for (std::size_t i = 0; i < nth; ++i)
                S += r.mult[i] * detail::log1p_c(t * eps[k * nth + i]);
            const double v = (w[k] * (-detail::expm1_c(-S))).real();
            h += v;
            if (k % 2 == 0)
                hc += 2.0 * v;
        }
        const double g = h / std::sqrt(t) * q.outer_step;
        acc += g;
        acc_inner_c += hc / std::sqrt(t) * q.outer_step;
        if ((ix + nx) % 2 == 0)
            acc_outer_c += 2.0 * g;
    }
    const double tlast = tscale * std::exp(nx * q.outer_step);
    acc += 2.0 * dens / std::sqrt(tlast);
    acc_inner_c += 2.0 * dens_c / std::sqrt(tlast);
    acc_outer_c += 2.0 * dens / std::sqrt(tlast);

    const double scale = std::max(std::fabs(acc), 1e-300);
    const double err = std::max(std::fabs(acc - acc_inner_c), std::fabs(acc - acc_outer_c)) / scale;
    if (!std::isfinite(acc) || err > q.max_rel_err)
        throw numeric_error("lcr_direct_cf: quadrature did not converge (relative gap " + std::to_string(err) + ")", 0,
                            err);
    return std::max(0.0, f * acc / std::sqrt(2.0));
}

inline double lcr_direct_stable(const EigenSpectrum &s, int L, double f, double T)
{
    return lcr_direct_cf(reduce_spectrum(s, L), f, T);
}

namespace detail
{
// Smallest a with a Chernoff bound P(X >= a) <= p for X = sum theta_i Exp(1).
inline double chernoff_upper(const EigenSpectrum &s, double p)
{
    const double t1 = s.theta.front();
    auto eval = [&](double sv, double &a) {
        double logm = 0.0;
        a = 0.0;
        for (double t : s.theta)
        {
            a += t / (1.0 - sv * t);
            logm -= std::log1p(-sv * t);
        }
        return -sv * a + logm; // log of the bound at the a matched to sv
    };
    const double target = std::log(p);
    double lo = 0.0, hi = 1.0 / t1, a = 0.0;
    for (int it = 0; it < 200; ++it)
    {
        const double mid = 0.5 * (lo + hi);
        (eval(mid, a) > target ? lo : hi) = mid;
    }
    eval(hi, a);
    return a;
}
} // namespace detail

namespace detail
{
// Lower tail P(X <= T) by Laplace inversion of prod (1 + z theta_i)^-1 / z
// along the parabolic contour through the density saddle point (> 0 below
// the mean). Relative accuracy, used where the Fourier sum only has absolute.
inline double cdf_lower_contour(const EigenSpectrum &s, double T, const LcrQuadrature &q = {})
{
    const ReducedSpectrum r = full_spectrum(s);
    const double s0 = cf_saddle(r, T);
    if (!(s0 > 0.0))
        throw domain_error("cdf_lower_contour: threshold is not below the mean");
    double var = 0.0;
    for (double th : r.theta)
    {
        const double tp = th / (1.0 + s0 * th);
        var += tp * tp;
    }
    const double sd = std::sqrt(var);
    const int nu = static_cast<int>(std::lround(q.inner_span / q.inner_step));
    const cplx j(0.0, 1.0);
    double acc = 0.0, acc_c = 0.0;
    for (int k = 0; k <= nu; ++k)
    {
        const double u = k * q.inner_step;
        const cplx z = s0 + (j * u - q.parabola * u * u) / sd;
        const cplx dz = (j - 2.0 * q.parabola * u) / sd;
        cplx logF = z * T - std::log(z);
        for (double th : r.theta)
            logF -= std::log(1.0 + z * th);
        double v = (std::exp(logF) * dz * q.inner_step / (std::numbers::pi * j)).real();
        if (k == 0)
            v *= 0.5;
        acc += v;
        if (k % 2 == 0)
            acc_c += 2.0 * v;
    }
    const double err = std::fabs(acc - acc_c) / std::max(std::fabs(acc), 1e-300);
    if (!std::isfinite(acc) || !(acc >= 0.0) || err > q.max_rel_err)
        throw numeric_error("cdf_direct: lower-tail contour did not converge (relative gap " + std::to_string(err) + ")", 0, err);
    return acc;
}
} // namespace detail

// Midpoint-rule Gil-Pelaez inversion of prod (1 - j s theta_i)^-1. Deep
// lower-tail values come from the contour rule above.
inline double cdf_direct(const EigenSpectrum &s, double T)
{
    if (!(T >= 0.0))
        throw domain_error("cdf_direct: negative threshold");
    if (T == 0.0)
        return 0.0;
    const double upper = detail::chernoff_upper(s, 1e-9);
    const double half_width = 1.05 * std::max(T, upper - T);
    const double delta = 2.0 * std::numbers::pi / half_width;

    const long max_terms = 20000000;
    const long block = std::max<long>(64, static_cast<long>(std::ceil(2.0 * std::numbers::pi / (delta * T))));
    double sum = 0.0, block_start = 0.0;
    for (long t = 0; t < max_terms; ++t)
    {
        const double sv = (t + 0.5) * delta;
        cplx psi = 1.0;
        double mod = 1.0;
        for (double th : s.theta)
        {
            psi /= cplx(1.0, -sv * th);
            mod /= std::sqrt(1.0 + sv * sv * th * th);
        }
        sum += (psi * std::polar(1.0, -sv * T)).imag() / (std::numbers::pi * (t + 0.5));
        if ((t + 1) % block == 0)
        {
            const bool small_terms = mod / (std::numbers::pi * (t + 0.5)) < 1e-8;
            if (small_terms && std::fabs(sum - block_start) < 1e-9)
            {
                const double F = std::clamp(0.5 - sum, 0.0, 1.0);
                if (F < 1e-2 && T < s.mean())
                {
                    try
                    {
                        return detail::cdf_lower_contour(s, T);
                    }
                    catch (const numeric_error &)
                    {
                    }
                }
                return F;
            }
            block_start = sum;
        }
    }
    throw numeric_error("cdf_direct: series did not converge", static_cast<std::size_t>(max_terms));
}

inline double afd_direct(const EigenSpectrum &s, double f, double T, int L = 2)
{
    const double F = cdf_direct(s, T);
    const double lcr = (static_cast<int>(s.theta.size()) == 1) ? lcr_direct_exact(s, f, T)
                                                              : lcr_direct_stable(s, std::min<int>(L, s.theta.size() - 1), f, T);
    if (!(lcr > 0.0))
        throw numeric_error("afd_direct: level crossing rate vanished");
    return F / lcr;
}

// Doppler of a Jakes process with the same lag-zero curvature as rho.
inline double effective_doppler(const std::function<double(double)> &rho, double h)
{
    const double curv = (rho(h) - 2.0 * rho(0.0) + rho(-h)) / (h * h);
    return std::sqrt(std::max(0.0, -curv) / (2.0 * std::numbers::pi * std::numbers::pi));
}

// ------------------------------------------------------------------------
// RIS link

struct GammaFit
{
    double shape_r = 0, rate_theta = 0;
};

struct ChiSquareStyleFit
{
    double alpha = 0, r2 = 0, gamma_corr = 0;
};

struct YMoments
{
    double EY = 0, EY2 = 0, VarY = 0;
    double pair_sum = 0; // sum over all i, j of 2F1(-1/2, -1/2, 1, |R_ij|^2)
    GammaFit fit;
    ChiSquareStyleFit chi;
};

inline double amp_hyp(double z) { return specfun::hyp2f1(-0.5, -0.5, 1.0, std::min(1.0, z)); }
inline double age_hyp(double z) { return specfun::hyp2f1(0.5, 0.5, 2.0, std::min(1.0, z)); }

inline YMoments moments_Y(const CMatrix &R, double beta)
{
    const Eigen::Index N = R.rows();
    YMoments m;
    double all = 0.0;
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j)
            all += (i == j) ? 4.0 / std::numbers::pi : amp_hyp(std::norm(R(i, j)));
    m.pair_sum = all;
    m.EY = N * std::sqrt(std::numbers::pi * beta) / 2.0;
    m.VarY = std::numbers::pi / 4.0 * beta * (all - static_cast<double>(N * N));
    m.EY2 = m.VarY + m.EY * m.EY;
    if (!(m.VarY > 0.0))
        throw degenerate_error("moments_Y: nonpositive variance of the amplitude sum");
    m.fit.rate_theta = m.EY / m.VarY;
    m.fit.shape_r = m.fit.rate_theta * m.EY;
    m.chi.alpha = m.VarY / (2.0 * m.EY);
    m.chi.r2 = m.EY / m.chi.alpha;
    return m;
}

// Raw moments of Y under the chi-square style parameterisation.
inline double chi_moment(const ChiSquareStyleFit &c, int k)
{
    double v = 1.0;
    for (int i = 0; i < k; ++i)
        v *= c.alpha * (c.r2 + 2.0 * i);
    return v;
}

// E[Y Y'^2] and E[Y^2 Y'^2] for the bivariate gamma with correlation gamma_corr.
inline double chi_cross12(const ChiSquareStyleFit &c)
{
    const double a = c.alpha, r = c.r2, g = c.gamma_corr;
    return a * a * a * r * (r + 2.0) * (r + 4.0 * g);
}

inline double chi_cross22(const ChiSquareStyleFit &c)
{
    const double a = c.alpha, r = c.r2, g = c.gamma_corr;
    return a * a * a * a * r * (r + 2.0) * (r * r + 8.0 * r * g + 2.0 * r + 8.0 * g * g + 16.0 * g);
}

inline double omega2(const CMatrix &R, double beta, double f)
{
    const Eigen::Index N = R.rows();
    double s = 0.0;
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j)
        {
            if (i == j)
            {
                s += 1.0;
                continue;
            }
            const double k = std::min(1.0, std::abs(R(i, j)));
            s += (k >= 1.0) ? 1.0 : specfun::elliptic_ek_combo(k);
        }
    return std::numbers::pi * std::numbers::pi * f * f * beta * s;
}

// SNR_R = c Y^2
inline double ris_snr_scale(const System &sys)
{
    return sys.cfg.tx_snr * sys.cfg.M() * sys.links.gains.beta_rb;
}

inline double pdf_snr_ris(double T, const GammaFit &g, double c)
{
    if (!(T > 0.0))
        return 0.0;
    const double y = std::sqrt(T / c);
    const double logp = g.shape_r * std::log(g.rate_theta) + (g.shape_r - 1.0) * std::log(y) - g.rate_theta * y -
                        std::lgamma(g.shape_r);
    return std::exp(logp) / (2.0 * std::sqrt(c * T));
}

inline double cdf_snr_ris(double T, const GammaFit &g, double c)
{
    if (!(T >= 0.0))
        throw domain_error("cdf_snr_ris: negative threshold");
    return specfun::reg_lower_incomplete_gamma(g.shape_r, g.rate_theta * std::sqrt(T / c));
}

inline double lcr_ris(double T, const GammaFit &g, double om2, double c)
{
    if (!(T >= 0.0) || !(c > 0.0))
        throw domain_error("lcr_ris: need T >= 0 and c > 0");
    if (T == 0.0)
    {
        if (g.shape_r > 1.0)
            return 0.0;
        if (g.shape_r == 1.0)
            return std::sqrt(om2 / (2.0 * std::numbers::pi)) * g.rate_theta;
        return std::numeric_limits<double>::infinity();
    }
    const double logv = 0.5 * std::log(om2 / (2.0 * std::numbers::pi)) + g.shape_r * std::log(g.rate_theta) +
                        0.5 * (g.shape_r - 1.0) * std::log(T / c) - g.rate_theta * std::sqrt(T / c) -
                        std::lgamma(g.shape_r);
    return std::exp(logv);
}

inline double afd_ris(double T, const GammaFit &g, double om2, double c)
{
    if (T == 0.0)
        return 0.0;
    const double lcr = lcr_ris(T, g, om2, c);
    if (!(lcr > 0.0))
        throw numeric_error("afd_ris: level crossing rate underflowed");
    return cdf_snr_ris(T, g, c) / lcr;
}

// ------------------------------------------------------------------------
// SNR temporal correlation (LoS RIS-BS link)

struct SnrTerms
{
    double aa = 0, ab = 0, ac = 0, bb = 0, bc = 0, cc = 0;

    double epsilon() const { return aa + 4.0 * ab + 2.0 * ac + 4.0 * bb + 4.0 * bc + cc; }
};

// E[ h_d(t)^H h_d(t) |a_b^H h_d(t + tau)| ]
inline double e_norm_abs_proj(double beta_d, int M, double q1, double q2, double rho_d_abs2)
{
    return std::sqrt(std::numbers::pi * beta_d * q1) / 2.0 * beta_d * (M + rho_d_abs2 * q2 / (2.0 * q1));
}

class SnrCorrModel
{
public:
    explicit SnrCorrModel(const System &sys) : sys_(sys)
    {
        if (!sys.cfg.los_only())
            throw domain_error("snr correlation requires a pure LoS RIS-BS link (kappa = inf)");
        const Links &L = sys.links;
        M_ = sys.cfg.M();
        N_ = sys.cfg.N();
        q1_ = (L.a_b.adjoint() * L.R_d * L.a_b)(0).real();
        q2_ = (L.a_b.adjoint() * L.R_d * L.R_d * L.a_b)(0).real();
        trRd2_ = (L.R_d * L.R_d).trace().real();
        absR2_.resize(N_ * N_);
        for (int i = 0; i < N_; ++i)
            for (int k = 0; k < N_; ++k)
                absR2_[i * N_ + k] = (i == k) ? 1.0 : std::norm(L.R_ur(i, k));
        ym_ = moments_Y(L.R_ur, L.gains.beta_ur);
        e_abs_proj_ = std::sqrt(std::numbers::pi * L.gains.beta_d * q1_) / 2.0;
    }

    const YMoments &y_moments() const { return ym_; }

    SnrTerms terms(double rho_d, double rho_ur) const
    {
        const LinkGains &g = sys_.links.gains;
        const double bd = g.beta_d, bur = g.beta_ur, brb = g.beta_rb;
        const double rd2 = rho_d * rho_d, ru2 = rho_ur * rho_ur;
        const double MM = static_cast<double>(M_) * M_;
        SnrTerms t;
        t.aa = bd * bd * (rd2 * (MM + trRd2_) + MM * (1.0 - rd2));
        t.ab = std::sqrt(brb) * ym_.EY * e_norm_abs_proj(bd, M_, q1_, q2_, rd2);
        t.ac = MM * bd * brb * ym_.EY2;
        double aged_sum = 0.0;
        for (double a2 : absR2_)
            aged_sum += amp_hyp(ru2 * a2);
        const double pi = std::numbers::pi;
        t.bb = pi * pi / 16.0 * bd * brb * bur * q1_ * amp_hyp(rd2) * aged_sum;
        ChiSquareStyleFit chi = ym_.chi;
        chi.gamma_corr = (aged_sum - static_cast<double>(N_) * N_) / (ym_.pair_sum - static_cast<double>(N_) * N_);
        t.bc = M_ * std::pow(brb, 1.5) * e_abs_proj_ * chi_cross12(chi);
        t.cc = MM * brb * brb * chi_cross22(chi);
        return t;
    }

    SnrTerms terms_at(double tau) const
    {
        return terms(jakes_rho(sys_.cfg.f_d, tau), jakes_rho(sys_.cfg.f_ur, tau));
    }

    // E[a] + 2 E[b] + E[c], channel units (no transmit SNR)
    double mean() const
    {
        const LinkGains &g = sys_.links.gains;
        return M_ * g.beta_d + 2.0 * std::sqrt(g.beta_rb) * ym_.EY * e_abs_proj_ + M_ * g.beta_rb * ym_.EY2;
    }

    double correlation(double rho_d, double rho_ur) const
    {
        const double m = mean();
        const double den = eps0() - m * m;
        if (!(den > 0.0))
            throw degenerate_error("snr_correlation: zero SNR variance");
        if (rho_d == 1.0 && rho_ur == 1.0)
            return 1.0;
        return (terms(rho_d, rho_ur).epsilon() - m * m) / den;
    }

    double correlation_at(double tau) const
    {
        if (tau == 0.0)
            return 1.0;
        return correlation(jakes_rho(sys_.cfg.f_d, tau), jakes_rho(sys_.cfg.f_ur, tau));
    }

private:
    double eps0() const
    {
        if (eps0_ < 0.0)
            eps0_ = terms(1.0, 1.0).epsilon();
        return eps0_;
    }

    System sys_;
    int M_ = 0, N_ = 0;
    double q1_ = 0, q2_ = 0, trRd2_ = 0, e_abs_proj_ = 0;
    std::vector<double> absR2_;
    YMoments ym_;
    mutable double eps0_ = -1.0;
};

inline SnrTerms snr_corr_terms(const System &sys, double tau) { return SnrCorrModel(sys).terms_at(tau); }

inline double snr_correlation(const System &sys, double tau) { return SnrCorrModel(sys).correlation_at(tau); }

// ------------------------------------------------------------------------
// Spatial channel correlation

struct ChannelCorrResult
{
    CMatrix D;
    RVector psi;
    CMatrix R_h;
    double S_metric = 0;
    std::vector<double> eig_fractions; // descending
};

// Per-antenna received power, written out term by term (no matrix algebra).
inline RVector antenna_power(const System &sys)
{
    const Links &L = sys.links;
    const LinkGains &g = L.gains;
    const int M = sys.cfg.M(), N = sys.cfg.N();
    const double pi = std::numbers::pi;
    cplx q = 0.0;
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b)
            q += std::conj(L.a_b(a)) * L.R_d(a, b) * L.a_b(b);
    const double sq = std::sqrt(q.real());
    double ris = 0.0;
    for (int l = 0; l < N; ++l)
        for (int j = 0; j < N; ++j)
        {
            if (j == l)
                continue;
            const cplx w = std::conj(L.a_r(l)) * L.R_r(l, j) * L.a_r(j);
            ris += (g.eta_rb * g.eta_rb + g.zeta_rb * g.zeta_rb * w.real()) * amp_hyp(std::norm(L.R_ur(l, j)));
        }
    const double ris_total =
        g.beta_rb * g.beta_ur * (N * (g.eta_rb * g.eta_rb + g.zeta_rb * g.zeta_rb) + pi / 4.0 * ris);
    RVector p(M);
    for (int i = 0; i < M; ++i)
    {
        cplx row = 0.0;
        for (int b = 0; b < M; ++b)
            row += L.R_d(i, b) * L.a_b(b);
        const double cross = (std::conj(L.a_b(i)) * row).real() / sq;
        p(i) = g.beta_d + N * pi * g.eta_rb * std::sqrt(g.beta_d * g.beta_rb * g.beta_ur) / 2.0 * cross + ris_total;
    }
    return p;
}

inline ChannelCorrResult channel_corr(const System &sys)
{
    const Links &L = sys.links;
    const LinkGains &g = L.gains;
    const int M = sys.cfg.M(), N = sys.cfg.N();
    const double pi = std::numbers::pi;
    const YMoments ym = moments_Y(L.R_ur, g.beta_ur);
    const double c1 = std::sqrt(g.beta_rb) * g.eta_rb, c2 = std::sqrt(g.beta_rb) * g.zeta_rb;

    const cplx q1 = (L.a_b.adjoint() * L.R_d * L.a_b)(0);
    const CVector e_nu_hd = std::sqrt(g.beta_d * pi) * (L.R_d * L.a_b) / (2.0 * std::sqrt(q1.real()));
    const CMatrix X = c1 * ym.EY * e_nu_hd * L.a_b.adjoint();

    CMatrix B(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            B(i, j) = g.beta_ur * pi / 4.0 * ((i == j) ? 4.0 / pi : amp_hyp(std::norm(L.R_ur(i, j))));
    const cplx trz = (L.a_r.asDiagonal() * B * L.a_r.conjugate().asDiagonal() * L.R_r).trace();
    const CMatrix Z = L.R_b * trz;

    ChannelCorrResult res;
    res.D = g.beta_d * L.R_d + X + X.adjoint() + c1 * c1 * ym.EY2 * L.a_b * L.a_b.adjoint() + c2 * c2 * Z;
    res.D = 0.5 * (res.D + res.D.adjoint()).eval();

    const RVector p = antenna_power(sys);
    res.psi.resize(M);
    for (int i = 0; i < M; ++i)
    {
        const double d = res.D(i, i).real();
        if (std::fabs(d - p(i)) > 1e-9 * std::fabs(p(i)))
            throw numeric_error("channel_corr: covariance diagonal disagrees with the per-antenna power");
        if (!(d > 0.0))
            throw degenerate_error("channel_corr: zero received power at an antenna");
        res.psi(i) = 1.0 / std::sqrt(d);
    }
    res.R_h = res.psi.asDiagonal() * res.D * res.psi.asDiagonal();
    for (int i = 0; i < M; ++i)
        res.R_h(i, i) = 1.0;

    Eigen::SelfAdjointEigenSolver<CMatrix> es(res.R_h, Eigen::EigenvaluesOnly);
    const RVector &w = es.eigenvalues();
    if (w.minCoeff() < -1e-9 * w.maxCoeff())
        throw numeric_error("channel_corr: R_h is not positive semidefinite");
    double tot = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        tot += std::max(0.0, w(i));
    for (Eigen::Index i = w.size() - 1; i >= 0; --i)
        res.eig_fractions.push_back(std::max(0.0, w(i)) / tot);
    res.S_metric = res.R_h.cwiseAbs().sum() / (static_cast<double>(M) * M);
    return res;
}

// ------------------------------------------------------------------------
// Mean SNR and ageing

class AgeingModel
{
public:
    explicit AgeingModel(const System &sys) : sys_(sys)
    {
        const Links &L = sys.links;
        const int N = sys.cfg.N();
        const double pi = std::numbers::pi;
        q1_ = (L.a_b.adjoint() * L.R_d * L.a_b)(0).real();
        ym_ = moments_Y(L.R_ur, L.gains.beta_ur);
        CMatrix Mm(N, N), Dg(N, N);
        double s5 = 0.0;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
            {
                const double a2 = (i == j) ? 1.0 : std::norm(L.R_ur(i, j));
                const double f2 = (i == j) ? 4.0 / pi : age_hyp(a2);
                Mm(i, j) = (i == j) ? 4.0 / pi : amp_hyp(a2);
                s5 += a2 * f2;
                Dg(i, j) = pi / 4.0 * L.R_r(i, j) * L.R_ur(i, j) * std::conj(L.a_r(i)) * L.a_r(j) * f2;
            }
        s5_ = s5;
        const cplx t6a = (pi / 4.0) * (L.a_r.conjugate().asDiagonal() * L.R_r * L.a_r.asDiagonal() * Mm).trace();
        const cplx t6b = (L.R_ur * Dg).trace();
        if (std::fabs(t6a.imag()) > 1e-10 * std::max(1.0, std::fabs(t6a.real())) ||
            std::fabs(t6b.imag()) > 1e-10 * std::max(1.0, std::fabs(t6b.real())))
            throw numeric_error("mean_snr_aged: imaginary residue in the scattered-path traces");
        t6a_ = t6a.real();
        t6b_ = t6b.real();
    }

    // Linear SNR at t + tau with the phase design of time t.
    double mean_aged(cplx rho_d, cplx rho_ur) const
    {
        const LinkGains &g = sys_.links.gains;
        const int M = sys_.cfg.M(), N = sys_.cfg.N();
        const double pi = std::numbers::pi;
        const double ru2 = std::norm(rho_ur);
        const double t1 = M * g.beta_d;
        const double t2 = N * pi * g.eta_rb * std::sqrt(g.beta_d * g.beta_rb * g.beta_ur * q1_) / 4.0 *
                          (std::conj(rho_d) * rho_ur + rho_d * std::conj(rho_ur)).real();
        const double eta2 = g.eta_rb * g.eta_rb, zeta2 = g.zeta_rb * g.zeta_rb;
        const double t4 = M * g.beta_rb * eta2 * ru2 * ym_.EY2;
        const double t5 = M * g.beta_rb * eta2 * g.beta_ur * pi / 4.0 * (1.0 - ru2) * s5_;
        const double t6 = M * g.beta_rb * zeta2 * g.beta_ur * (ru2 * t6a_ + (1.0 - ru2) * t6b_);
        return sys_.cfg.tx_snr * (t1 + t2 + t4 + t5 + t6);
    }

    double mean_aged_at(double tau) const
    {
        return mean_aged(jakes_rho(sys_.cfg.f_d, tau), jakes_rho(sys_.cfg.f_ur, tau));
    }

    double mean() const { return mean_aged(1.0, 1.0); }

private:
    System sys_;
    double q1_ = 0, s5_ = 0, t6a_ = 0, t6b_ = 0;
    YMoments ym_;
};

inline double mean_snr_aged(const System &sys, double tau) { return AgeingModel(sys).mean_aged_at(tau); }

inline double mean_snr(const System &sys) { return AgeingModel(sys).mean(); }

struct AgeingLoss
{
    double absolute = 0, percent = 0;
};

inline AgeingLoss ageing_loss(const AgeingModel &m, double tau)
{
    const double m0 = m.mean();
    if (tau == 0.0)
        return {};
    const double loss = m0 - m.mean_aged_at(tau);
    return {loss, 100.0 * loss / m0};
}

inline AgeingLoss ageing_loss(const System &sys, double tau) { return ageing_loss(AgeingModel(sys), tau); }

} // namespace ris_sostat
