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

#include "catch_amalgamated.hpp"

#include "ris_sostat/analytic.hpp"
#include "ris_sostat/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>
#include <numbers>

using namespace ris_sostat;
using namespace ris_sostat::mc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{
ScenarioConfig small_config()
{
    ScenarioConfig c;
    c.M_x = 4, c.M_z = 2, c.N_x = 8, c.N_z = 4;
    return c;
}

double max_abs(const CMatrix &A) { return A.cwiseAbs().maxCoeff(); }

// two-sample Kolmogorov-Smirnov statistic
double ks_statistic(std::vector<double> a, std::vector<double> b)
{
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size())
    {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}
} // namespace

TEST_CASE("correlated Gaussian vectors", "[mc]")
{
    const CMatrix R = spatial_correlation(4, 1, 0.3, SpatialModel{});
    const CMatrix F = psd_factor(R);
    const double beta = 2.5;
    const long n = 200000;
    Rng rng(7);
    CMatrix C = CMatrix::Zero(4, 4), X = CMatrix::Zero(4, 4);
    const cplx rho(0.6, -0.3);
    for (long i = 0; i < n; ++i)
    {
        const CVector h = gen_vector(F, beta, rng);
        C += h * h.adjoint();
        auto [a, b] = gen_pair(F, beta, rho, rng);
        X += b * a.adjoint();
    }
    CHECK(max_abs(C / n - beta * R) < 0.02 * beta);
    CHECK(max_abs(X / n - rho * beta * R) < 0.02 * beta);

    auto [a1, b1] = gen_pair(F, beta, 1.0, rng);
    CHECK(max_abs(a1 - b1) == 0.0);
    CMatrix Z = CMatrix::Zero(4, 4);
    for (long i = 0; i < 50000; ++i)
    {
        auto [a, b] = gen_pair(F, beta, 0.0, rng);
        Z += b * a.adjoint();
    }
    CHECK(max_abs(Z / 50000.0) < 0.04 * beta);
}

TEST_CASE("pair marginals follow the single-vector law", "[mc]")
{
    // desk-size RIS, entries at both ends of the array
    const CMatrix F = psd_factor(spatial_correlation(8, 4, 0.1, SpatialModel{}));
    const std::size_t n = 20000;
    const double crit = 1.628 * std::sqrt(2.0 / n); // 1% level
    Rng rng(31);
    for (const Eigen::Index k : {Eigen::Index(0), Eigen::Index(31)})
    {
        std::vector<double> v, p0, p1;
        for (std::size_t i = 0; i < n; ++i)
        {
            v.push_back(std::abs(gen_vector(F, 1.0, rng)(k)));
            auto [a, b] = gen_pair(F, 1.0, cplx(0.5, 0.4), rng);
            p0.push_back(std::abs(a(k)));
            p1.push_back(std::abs(b(k)));
        }
        CHECK(ks_statistic(v, p0) < crit);
        CHECK(ks_statistic(v, p1) < crit);
    }
}

TEST_CASE("sum-of-sinusoids process follows the Jakes correlation", "[mc]")
{
    const double f = 1.0, dt = 1.0 / 64;
    const long lags = 129, origins = 128, reps = 2000;
    std::vector<cplx> acc(lags, 0.0);
    double dv = 0.0;
    for (long r = 0; r < reps; ++r)
    {
        Rng rng = child_rng(11, r);
        const CMatrix u = sos_processes(1, f, dt, lags + origins, 64, rng);
        for (long o = 0; o < origins; ++o)
        {
            for (long k = 0; k < lags; ++k)
                acc[k] += u(0, o + k) * std::conj(u(0, o));
            dv += std::norm(u(0, o + 1) - u(0, o));
        }
    }
    const double n = static_cast<double>(reps * origins);
    for (long k = 0; k < lags; k += 4)
        CHECK_THAT(acc[k].real() / n, WithinAbs(jakes_rho(f, k * dt), 0.02));
    // lag-zero curvature 2 pi^2 f^2
    const double curv = dv / n / (dt * dt);
    CHECK_THAT(curv, WithinRel(2.0 * std::numbers::pi * std::numbers::pi * f * f, 0.03));
    Rng rng(1);
    CHECK_THROWS_AS(sos_processes(1, f, 0.1, 10, 64, rng), domain_error);
}

TEST_CASE("phase design aligns every reflected path", "[mc]")
{
    const System sys = make_system(small_config());
    const SnapshotFactors fac = snapshot_factors(sys);
    Rng rng(3);
    for (int i = 0; i < 20; ++i)
    {
        const CVector hd = gen_vector(fac.F_d, 1.0, rng);
        const CVector hu = gen_vector(fac.F_ur, 1.0, rng);
        const PhaseDesign p = apply_phase_design(hu, hd, sys.links.a_b, sys.links.a_r);
        CHECK(std::abs(sys.links.a_r.dot(reflect(p, hu)) - p.nu * hu.cwiseAbs().sum()) < 1e-10);
        CHECK((p.phi.cwiseAbs() - RVector::Ones(p.phi.size())).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(std::abs(std::abs(p.nu) - 1.0) < 1e-14);
        // the reflected path adds coherently to the direct projection
        const cplx proj = sys.links.a_b.dot(hd);
        CHECK(std::abs(std::arg(p.nu) - std::arg(proj)) < 1e-12);
    }
    const CVector hu = gen_vector(fac.F_ur, 1.0, rng);
    CHECK(apply_phase_design(hu, CVector::Zero(8), sys.links.a_b, sys.links.a_r).nu == cplx(1.0, 0.0));
}

TEST_CASE("level crossing bookkeeping", "[mc]")
{
    const double dt = 1e-3;
    std::vector<double> flat(1000, 2.0);
    const auto lf = estimate_lcr(flat, dt, {1.0, 3.0});
    CHECK(lf[0].count == 0);
    CHECK(lf[0].degenerate);
    CHECK(estimate_afd(flat, dt, {3.0})[0].degenerate);

    // ten periods of a unit sine: ten up-crossings of 0.5 by time 10
    std::vector<double> s;
    for (long i = 0; i <= 10000; ++i)
        s.push_back(std::sin(2 * std::numbers::pi * (i * dt + 0.25)));
    const LevelStats ls = level_stats(s, dt, 0.5);
    CHECK(ls.up == 10);
    CHECK_THAT(estimate_lcr(s, dt, {0.5})[0].value, WithinRel(1.0, 1e-12));
    CHECK_THAT(ls.below / 10.0, WithinRel(2.0 / 3.0, 1e-5));
    CHECK_THAT(estimate_afd(s, dt, {0.5})[0].value, WithinRel(2.0 / 3.0, 1e-5));
    CHECK(ls.fades == 10);
    CHECK_THAT(ls.fade_time / ls.fades, WithinRel(2.0 / 3.0, 1e-5));

    // square wave: 0.3 low, 0.7 high, period 1
    std::vector<double> q;
    for (long i = 0; i < 5000; ++i)
        q.push_back(std::fmod(i * dt + 1e-9, 1.0) < 0.3 ? 0.0 : 1.0);
    const LevelStats lq = level_stats(q, dt, 0.5);
    CHECK(lq.up == 5);
    CHECK_THAT(lq.below, WithinAbs(1.5, 5 * dt));
    CHECK_THROWS_AS(level_stats({1.0}, dt, 0.5), domain_error);
}

TEST_CASE("crossing estimates satisfy the accounting identity", "[mc]")
{
    const System sys = make_system(small_config());
    McConfig mc;
    mc.replicates = 40;
    mc.duration = 5.0;
    const std::vector<double> T{0.5, 0.8, 1.0, 1.5};
    const double mean = mean_snr(make_system([&] {
        ScenarioConfig c = small_config();
        c.ris_gain_scale = 1e-20;
        return c;
    }()));
    std::vector<double> th;
    for (double t : T)
        th.push_back(t * mean);
    const CrossingResult r = estimate_crossings(sys, SnrMode::Direct, mc, th);
    REQUIRE(r.replicates == 40);
    for (std::size_t k = 0; k < th.size(); ++k)
    {
        REQUIRE(r.lcr[k].count > 20);
        CHECK_THAT(r.afd[k].value * r.lcr[k].value, WithinRel(r.below_fraction[k], 1e-12));
        CHECK(r.afd[k].stderr_ > 0.0);
        CHECK(r.lcr[k].stderr_ > 0.0);
    }
}

TEST_CASE("results do not depend on the worker count", "[mc]")
{
    ScenarioConfig c = small_config();
    c.kappa_rb = INFINITY;
    const System sys = make_system(c);
    McConfig mc;
    mc.replicates = 300;
    mc.seed = 99;
    const std::vector<double> taus{0.0, 0.01, 0.05};
    ::setenv("RIS_SOSTAT_THREADS", "1", 1);
    const auto a = estimate_snr_corr(sys, taus, mc);
    const auto ca = estimate_crossings(sys, SnrMode::Full, [&] {
        McConfig m = mc;
        m.replicates = 20;
        m.duration = 2.0;
        return m;
    }(), {1e-7, 1e-6});
    ::setenv("RIS_SOSTAT_THREADS", "3", 1);
    const auto b = estimate_snr_corr(sys, taus, mc);
    const auto cb = estimate_crossings(sys, SnrMode::Full, [&] {
        McConfig m = mc;
        m.replicates = 20;
        m.duration = 2.0;
        return m;
    }(), {1e-7, 1e-6});
    ::unsetenv("RIS_SOSTAT_THREADS");
    for (std::size_t k = 0; k < taus.size(); ++k)
    {
        CHECK(a[k].value == b[k].value);
        CHECK(a[k].stderr_ == b[k].stderr_);
    }
    for (std::size_t k = 0; k < 2; ++k)
    {
        CHECK(ca.lcr[k].value == cb.lcr[k].value);
        CHECK(ca.below_fraction[k] == cb.below_fraction[k]);
    }
    mc.seed = 100;
    CHECK(estimate_snr_corr(sys, taus, mc)[1].value != a[1].value);
}

TEST_CASE("single-branch LCR matches Rayleigh", "[mc]")
{
    ScenarioConfig c;
    c.M_x = 1, c.M_z = 1, c.N_x = 2, c.N_z = 1;
    const System sys = make_system(c);
    McConfig mc;
    mc.replicates = 400;
    mc.duration = 20.0;
    const double m = c.tx_snr * sys.links.gains.beta_d;
    const std::vector<double> rel{0.05, 0.2, 0.5, 1.0, 2.0};
    std::vector<double> th;
    for (double t : rel)
        th.push_back(t * m);
    const CrossingResult r = estimate_crossings(sys, SnrMode::Direct, mc, th);
    const EigenSpectrum s = direct_spectrum(sys);
    for (std::size_t k = 0; k < th.size(); ++k)
    {
        REQUIRE(r.lcr[k].count > 100);
        CHECK_THAT(r.lcr[k].value, WithinRel(lcr_direct_exact(s, c.f_d, th[k]), 0.10));
        CHECK_THAT(r.afd[k].value, WithinRel(afd_direct(s, c.f_d, th[k]), 0.10));
    }
}

TEST_CASE("SNR correlation estimator limits", "[mc]")
{
    ScenarioConfig c = small_config();
    c.kappa_rb = INFINITY;
    const System sys = make_system(c);
    McConfig mc;
    mc.replicates = 20000;
    const auto e = estimate_snr_corr_rho(sys, {{1.0, 1.0}, {0.0, 0.0}}, mc);
    CHECK_THAT(e[0].value, WithinAbs(1.0, 1e-12));
    CHECK(std::fabs(e[1].value) < 3.0 * e[1].stderr_ + 1e-3);
    const double rho = jakes_rho(c.f_d, 0.01);
    const auto g = estimate_snr_corr_rho(sys, {{rho, rho}}, mc)[0];
    CHECK(std::fabs(g.value - SnrCorrModel(sys).correlation(rho, rho)) < 4.0 * g.stderr_ + 0.005);
    c.kappa_rb = 1.0;
    CHECK_THROWS_AS(estimate_snr_corr(make_system(c), {0.0}, mc), domain_error);
}

TEST_CASE("empirical channel correlation", "[mc]")
{
    ScenarioConfig c = small_config();
    c.ris_gain_scale = 1e-20;
    const System sd = make_system(c);
    McConfig mc;
    mc.replicates = 20000;
    const ChannelCorrEstimate e = estimate_channel_corr(sd, mc);
    CHECK(e.draws == 20000);
    CHECK(max_abs(e.R_h - sd.links.R_d) < 0.03);
    double tot = 0.0;
    for (double f : e.eig_fractions)
        tot += f;
    CHECK_THAT(tot, WithinAbs(1.0, 1e-12));

    const System sys = make_system(small_config());
    const ChannelCorrEstimate m = estimate_channel_corr(sys, mc);
    const ChannelCorrResult a = channel_corr(sys);
    CHECK(max_abs(m.R_h - a.R_h) < 0.03);
    for (int i = 0; i < c.M(); ++i)
        CHECK(std::abs(m.R_h(i, i) - 1.0) < 1e-12);
}

TEST_CASE("ageing estimator", "[mc]")
{
    const System sys = make_system(small_config());
    McConfig mc;
    mc.replicates = 20000;
    const AgeingEstimate z = estimate_ageing(sys, {0.0}, mc);
    CHECK(z.percent[0].value == 0.0);
    CHECK(z.aged[0].value == z.mean0);

    const AgeingModel am(sys);
    CHECK_THAT(estimate_mean_snr(sys, mc).value, WithinRel(am.mean(), 0.01));

    // frozen phases against a decorrelated UE-RIS link
    const std::vector<std::pair<double, double>> rhos{{1.0, 0.0}, {0.7, 0.4}, {0.0, 0.9}};
    const AgeingEstimate e = estimate_ageing_rho(sys, rhos, mc);
    for (std::size_t k = 0; k < rhos.size(); ++k)
    {
        const double ref = am.mean_aged(rhos[k].first, rhos[k].second);
        CHECK(std::fabs(e.aged[k].value - ref) < 4.0 * e.aged[k].stderr_ + 0.002 * ref);
    }
}

TEST_CASE("direct and RIS mean SNR", "[mc]")
{
    ScenarioConfig c = small_config();
    c.kappa_rb = INFINITY;
    c.direct_gain_scale = 1e-20;
    const System sr = make_system(c);
    McConfig mc;
    mc.replicates = 20000;
    CHECK_THAT(estimate_mean_snr(sr, mc).value, WithinRel(mean_snr(sr), 0.01));
    c = small_config();
    c.ris_gain_scale = 1e-20;
    const System sd = make_system(c);
    CHECK_THAT(estimate_mean_snr(sd, mc).value, WithinRel(mean_snr(sd), 0.01));
}
