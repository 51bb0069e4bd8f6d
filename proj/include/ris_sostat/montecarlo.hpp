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

#include "analytic.hpp"
#include "channel.hpp"
#include "errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace ris_sostat::mc
{

using Rng = std::mt19937_64;

struct McConfig
{
    long replicates = 100000;
    std::uint64_t seed = 1;
    int sample_rate = 64;   // samples per 1/f_max
    double duration = 10.0; // normalised time span of one time-series replicate
    int sos_count = 64;     // sinusoids per scalar process

    void validate() const
    {
        if (replicates < 1)
            throw domain_error("McConfig: replicates must be >= 1");
        if (sample_rate < 16)
            throw domain_error("McConfig: sample_rate must be >= 16");
        if (sos_count < 16)
            throw domain_error("McConfig: sos_count must be >= 16");
        if (!(duration > 0.0))
            throw domain_error("McConfig: duration must be positive");
    }
};

struct McEstimate
{
    double value = 0, stderr_ = 0;
    long count = 0;
    bool degenerate = false;
};

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Generator owned by one replicate, a pure function of (seed, index).
inline Rng child_rng(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(seed)), static_cast<std::uint32_t>(splitmix64(seed) >> 32),
                      static_cast<std::uint32_t>(splitmix64(seed ^ splitmix64(index))),
                      static_cast<std::uint32_t>(splitmix64(index) >> 32)};
    return Rng(seq);
}

inline int worker_count()
{
    if (const char *env = std::getenv("RIS_SOSTAT_THREADS"))
    {
        const int n = std::atoi(env);
        if (n >= 1)
            return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs work(acc, index, rng) over replicates in fixed-size blocks, each block
// into its own accumulator; blocks are then merged in index order so the
// result does not depend on the number of workers.
template <class Acc, class Make, class Work>
Acc run_blocks(long replicates, long block, std::uint64_t seed, Make make, Work work,
               std::vector<Acc> *per_block = nullptr)
{
    const long nblocks = (replicates + block - 1) / block;
    std::vector<Acc> accs;
    accs.reserve(nblocks);
    for (long b = 0; b < nblocks; ++b)
        accs.push_back(make());
    auto run = [&](long b) {
        const long lo = b * block, hi = std::min(replicates, lo + block);
        for (long i = lo; i < hi; ++i)
        {
            Rng rng = child_rng(seed, static_cast<std::uint64_t>(i));
            work(accs[b], i, rng);
        }
    };
    const int nw = std::min<long>(worker_count(), nblocks);
    if (nw <= 1)
        for (long b = 0; b < nblocks; ++b)
            run(b);
    else
    {
        std::vector<std::thread> pool;
        for (int w = 0; w < nw; ++w)
            pool.emplace_back([&, w] {
                for (long b = w; b < nblocks; b += nw)
                    run(b);
            });
        for (auto &t : pool)
            t.join();
    }
    Acc total = make();
    for (auto &a : accs)
        total.merge(a);
    if (per_block)
        *per_block = std::move(accs);
    return total;
}

inline CVector std_complex_normal(Eigen::Index n, Rng &rng)
{
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    CVector u(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const double re = nd(rng);
        const double im = nd(rng);
        u(i) = cplx(re, im);
    }
    return u;
}

// sqrt(beta) F u with F F^H = R.
inline CVector gen_vector(const CMatrix &F, double beta, Rng &rng)
{
    return std::sqrt(beta) * (F * std_complex_normal(F.cols(), rng));
}

// Second member of an exact conditional-Gaussian pair.
inline CVector advance(const CVector &first, const CMatrix &F, double beta, cplx rho, Rng &rng)
{
    const double s = std::sqrt(std::max(0.0, 1.0 - std::norm(rho)));
    if (s == 0.0)
        return rho * first;
    return rho * first + s * gen_vector(F, beta, rng);
}

// Exact conditional-Gaussian pair: second = rho first + sqrt(1 - |rho|^2) innovation.
inline std::pair<CVector, CVector> gen_pair(const CMatrix &F, double beta, cplx rho, Rng &rng)
{
    if (!(std::abs(rho) <= 1.0 + 1e-15))
        throw domain_error("gen_pair: |rho| must not exceed 1");
    CVector first = gen_vector(F, beta, rng);
    return {first, advance(first, F, beta, rho, rng)};
}

// r independent unit-power Jakes processes by sum of sinusoids, r x n samples.
inline CMatrix sos_processes(Eigen::Index r, double f, double dt, long n, int sos_count, Rng &rng)
{
    if (f * dt > 1.0 / 16.0)
        throw domain_error("gen_timeseries: undersampled, need at least 16 samples per 1/f");
    std::uniform_real_distribution<double> ud(0.0, 2.0 * std::numbers::pi);
    CMatrix U(r, n);
    const double amp = 1.0 / std::sqrt(static_cast<double>(sos_count));
    std::vector<double> pr(sos_count), pi_(sos_count), rr(sos_count), ri(sos_count);
    for (Eigen::Index q = 0; q < r; ++q)
    {
        for (int k = 0; k < sos_count; ++k)
        {
            const double alpha = ud(rng), phase = ud(rng);
            const double w = 2.0 * std::numbers::pi * f * std::cos(alpha) * dt;
            pr[k] = amp * std::cos(phase);
            pi_[k] = amp * std::sin(phase);
            rr[k] = std::cos(w);
            ri[k] = std::sin(w);
        }
        for (long t = 0; t < n; ++t)
        {
            double sr = 0.0, si = 0.0;
            for (int k = 0; k < sos_count; ++k)
            {
                sr += pr[k];
                si += pi_[k];
                const double nr = pr[k] * rr[k] - pi_[k] * ri[k];
                pi_[k] = pr[k] * ri[k] + pi_[k] * rr[k];
                pr[k] = nr;
            }
            U(q, t) = cplx(sr, si);
        }
    }
    return U;
}

// L x n channel samples with Jakes temporal and F F^H spatial correlation.
inline CMatrix gen_timeseries(const CMatrix &F, double beta, double f, double dt, long n, int sos_count, Rng &rng)
{
    return std::sqrt(beta) * (F * sos_processes(F.cols(), f, dt, n, sos_count, rng));
}

struct PhaseDesign
{
    CVector phi; // diagonal of the reflection matrix
    cplx nu = 1.0;
};

inline cplx unit_phase(cplx z)
{
    const double a = std::abs(z);
    return a == 0.0 ? cplx(1.0, 0.0) : z / a;
}

inline PhaseDesign apply_phase_design(const CVector &h_ur, const CVector &h_d, const CVector &a_b,
                                      const CVector &a_r)
{
    PhaseDesign p;
    p.nu = unit_phase(a_b.dot(h_d)); // dot conjugates its left operand
    p.phi.resize(h_ur.size());
    for (Eigen::Index k = 0; k < h_ur.size(); ++k)
        p.phi(k) = p.nu * unit_phase(a_r(k)) * std::conj(unit_phase(h_ur(k)));
    return p;
}

// ------------------------------------------------------------------------
// Time series

enum class SnrMode
{
    Direct,
    RisOnly,
    Full
};

inline const char *mode_name(SnrMode m)
{
    switch (m)
    {
    case SnrMode::Direct: return "direct";
    case SnrMode::RisOnly: return "ris";
    default: return "full";
    }
}

// Doppler used to normalise time for a mode, and the fastest Doppler present.
inline double reference_doppler(const ScenarioConfig &c, SnrMode m)
{
    return m == SnrMode::RisOnly ? c.f_ur : c.f_d;
}

inline double fastest_doppler(const ScenarioConfig &c, SnrMode m)
{
    switch (m)
    {
    case SnrMode::Direct: return c.f_d;
    case SnrMode::RisOnly: return c.f_ur;
    default: return std::max(c.f_d, c.f_ur);
    }
}

struct SeriesPlan
{
    double dt = 0;       // seconds
    long samples = 0;    // per replicate
    double f_ref = 0;    // normalising Doppler
};

inline SeriesPlan plan_series(const ScenarioConfig &c, SnrMode m, const McConfig &mc)
{
    SeriesPlan p;
    p.f_ref = reference_doppler(c, m);
    const double fmax = fastest_doppler(c, m);
    if (!(p.f_ref > 0.0) || !(fmax > 0.0))
        throw domain_error("simulate_snr_series: Doppler frequency must be positive");
    p.dt = 1.0 / (mc.sample_rate * fmax);
    p.samples = static_cast<long>(std::ceil(mc.duration / (p.f_ref * p.dt))) + 1;
    return p;
}

// Factors of the spatial correlations, shared by all replicates.
struct SeriesFactors
{
    CMatrix F_d, F_ur;
};

inline SeriesFactors series_factors(const System &sys, SnrMode m)
{
    SeriesFactors f;
    if (m != SnrMode::RisOnly)
        f.F_d = psd_factor(sys.links.R_d);
    if (m != SnrMode::Direct)
        f.F_ur = psd_factor(sys.links.R_ur);
    return f;
}

// One replicate of the SNR process, phase design re-optimised at every sample.
inline std::vector<double> simulate_snr_series(const System &sys, SnrMode m, const SeriesFactors &fac,
                                               const SeriesPlan &plan, const McConfig &mc, Rng &rng)
{
    const ScenarioConfig &c = sys.cfg;
    const LinkGains &g = sys.links.gains;
    if (m != SnrMode::Direct && !c.los_only())
        throw domain_error("simulate_snr_series: RIS crossing studies need a LoS RIS-BS link (kappa = inf)");
    const long n = plan.samples;
    std::vector<double> snr(n, 0.0);
    CMatrix hd, hu;
    if (m != SnrMode::RisOnly)
        hd = gen_timeseries(fac.F_d, g.beta_d, c.f_d, plan.dt, n, mc.sos_count, rng);
    if (m != SnrMode::Direct)
        hu = gen_timeseries(fac.F_ur, g.beta_ur, c.f_ur, plan.dt, n, mc.sos_count, rng);
    const int M = c.M();
    for (long t = 0; t < n; ++t)
    {
        if (m == SnrMode::Direct)
        {
            snr[t] = c.tx_snr * hd.col(t).squaredNorm();
            continue;
        }
        const double Y = hu.col(t).cwiseAbs().sum();
        if (m == SnrMode::RisOnly)
        {
            snr[t] = c.tx_snr * M * g.beta_rb * Y * Y;
            continue;
        }
        // LoS composite: h = h_d + sqrt(beta_rb) nu Y a_b
        const cplx nu = unit_phase(sys.links.a_b.dot(hd.col(t)));
        const CVector h = hd.col(t) + std::sqrt(g.beta_rb) * nu * Y * sys.links.a_b;
        snr[t] = c.tx_snr * h.squaredNorm();
    }
    return snr;
}

// Crossing and fade bookkeeping of one series against one threshold.
struct LevelStats
{
    long up = 0;             // up-crossings
    long fades = 0;          // fades starting and ending inside the series
    double fade_time = 0.0;  // time inside those fades
    double below = 0.0;      // total time below the threshold
    double duration = 0.0;
};

inline LevelStats level_stats(const std::vector<double> &x, double dt, double T)
{
    if (x.size() < 2)
        throw domain_error("estimate_lcr: series needs at least two samples");
    LevelStats s;
    s.duration = dt * (x.size() - 1);
    bool in_fade = false, fade_open = false; // fade_open: started inside the series
    double fade_start = 0.0;
    if (x[0] < T)
    {
        in_fade = true;
        fade_open = false;
    }
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
    {
        const double a = x[i] - T, b = x[i + 1] - T;
        const double t0 = dt * i;
        if (a < 0.0 && b < 0.0)
            s.below += dt;
        else if (a < 0.0 || b < 0.0)
        {
            const double frac = (a < 0.0 ? -a : -b) / std::fabs(b - a);
            s.below += dt * frac;
        }
        if (a < 0.0 && b >= 0.0)
        {
            ++s.up;
            const double tc = t0 + dt * (-a) / (b - a);
            if (in_fade && fade_open)
            {
                ++s.fades;
                s.fade_time += tc - fade_start;
            }
            in_fade = false;
        }
        else if (a >= 0.0 && b < 0.0)
        {
            in_fade = true;
            fade_open = true;
            fade_start = t0 + dt * a / (a - b);
        }
    }
    return s;
}

// Per-threshold crossing and fade sums over replicates.
struct CrossingAcc
{
    std::size_t nt = 0;
    long reps = 0;
    std::vector<double> up, up2, below, below2, below_up, fades, ftime, duration;

    explicit CrossingAcc(std::size_t n = 0)
        : nt(n), up(n), up2(n), below(n), below2(n), below_up(n), fades(n), ftime(n), duration(n) {}

    void add(std::size_t k, const LevelStats &s)
    {
        up[k] += s.up;
        up2[k] += static_cast<double>(s.up) * s.up;
        below[k] += s.below;
        below2[k] += s.below * s.below;
        below_up[k] += s.below * s.up;
        fades[k] += s.fades;
        ftime[k] += s.fade_time;
        duration[k] += s.duration;
    }

    void merge(const CrossingAcc &o)
    {
        reps += o.reps;
        for (std::size_t k = 0; k < nt; ++k)
        {
            up[k] += o.up[k];
            up2[k] += o.up2[k];
            below[k] += o.below[k];
            below2[k] += o.below2[k];
            below_up[k] += o.below_up[k];
            fades[k] += o.fades[k];
            ftime[k] += o.ftime[k];
            duration[k] += o.duration[k];
        }
    }
};

struct CrossingResult
{
    std::vector<double> thresholds;
    std::vector<McEstimate> lcr;         // up-crossings per second
    std::vector<McEstimate> afd;         // seconds, time below over up-crossings
    std::vector<double> below_fraction;  // all time below the threshold
    std::vector<double> completed_fade;  // mean length of fades fully inside a series
    std::vector<long> completed_count;
    double f_ref = 0;
    long replicates = 0;
    double total_time = 0;
};

inline CrossingResult finish_crossings(const CrossingAcc &a, const std::vector<double> &thresholds, double f_ref)
{
    CrossingResult r;
    r.thresholds = thresholds;
    r.f_ref = f_ref;
    r.replicates = a.reps;
    const double n = static_cast<double>(a.reps);
    for (std::size_t k = 0; k < a.nt; ++k)
    {
        const double D = a.duration[k];
        const double d1 = D / n; // duration per replicate
        r.total_time = D;
        McEstimate l;
        l.count = static_cast<long>(a.up[k]);
        l.value = a.up[k] / D;
        if (a.reps > 1)
        {
            const double m = a.up[k] / n, v = std::max(0.0, a.up2[k] / n - m * m) * n / (n - 1.0);
            l.stderr_ = std::sqrt(v / n) / d1;
        }
        l.degenerate = (a.up[k] == 0.0);
        r.lcr.push_back(l);

        McEstimate f;
        f.count = static_cast<long>(a.up[k]);
        if (a.up[k] > 0.0)
        {
            f.value = a.below[k] / a.up[k];
            if (a.reps > 1)
            {
                // delta method for a ratio of per-replicate sums
                const double R = f.value, mb = a.up[k] / n;
                const double ss = std::max(0.0, a.below2[k] - 2.0 * R * a.below_up[k] + R * R * a.up2[k]);
                f.stderr_ = std::sqrt(ss / (n - 1.0) / n) / mb;
            }
        }
        else
        {
            f.value = std::numeric_limits<double>::infinity();
            f.degenerate = true;
        }
        r.afd.push_back(f);
        r.below_fraction.push_back(a.below[k] / D);
        r.completed_fade.push_back(a.fades[k] > 0.0 ? a.ftime[k] / a.fades[k]
                                                    : std::numeric_limits<double>::infinity());
        r.completed_count.push_back(static_cast<long>(a.fades[k]));
    }
    return r;
}

// Crossing and fade estimates of a single given series.
inline std::vector<McEstimate> estimate_lcr(const std::vector<double> &x, double dt, const std::vector<double> &thresholds)
{
    std::vector<McEstimate> out;
    for (double T : thresholds)
    {
        const LevelStats s = level_stats(x, dt, T);
        McEstimate e;
        e.count = s.up;
        e.value = s.up / s.duration;
        e.degenerate = (s.up == 0);
        out.push_back(e);
    }
    return out;
}

// Time below T per up-crossing, so that AFD * LCR is the time fraction below T.
inline std::vector<McEstimate> estimate_afd(const std::vector<double> &x, double dt, const std::vector<double> &thresholds)
{
    std::vector<McEstimate> out;
    for (double T : thresholds)
    {
        const LevelStats s = level_stats(x, dt, T);
        McEstimate e;
        e.count = s.up;
        if (s.up > 0)
            e.value = s.below / s.up;
        else
        {
            e.value = std::numeric_limits<double>::infinity();
            e.degenerate = true;
        }
        out.push_back(e);
    }
    return out;
}

// LCR and AFD of the SNR process over independent time-series replicates.
inline CrossingResult estimate_crossings(const System &sys, SnrMode m, const McConfig &mc,
                                         const std::vector<double> &thresholds)
{
    mc.validate();
    const SeriesFactors fac = series_factors(sys, m);
    const SeriesPlan plan = plan_series(sys.cfg, m, mc);
    const std::size_t nt = thresholds.size();
    CrossingAcc total = run_blocks<CrossingAcc>(
        mc.replicates, 16, mc.seed, [&] { return CrossingAcc(nt); },
        [&](CrossingAcc &acc, long, Rng &rng) {
            const std::vector<double> x = simulate_snr_series(sys, m, fac, plan, mc, rng);
            for (std::size_t k = 0; k < nt; ++k)
                acc.add(k, level_stats(x, plan.dt, thresholds[k]));
            ++acc.reps;
        });
    return finish_crossings(total, thresholds, plan.f_ref);
}

// ------------------------------------------------------------------------
// Snapshot draws for the pairwise statistics

struct SnapshotFactors
{
    CMatrix F_d, F_ur, F_b, F_r;
};

inline SnapshotFactors snapshot_factors(const System &sys)
{
    SnapshotFactors f;
    f.F_d = psd_factor(sys.links.R_d);
    f.F_ur = psd_factor(sys.links.R_ur);
    f.F_b = psd_factor(sys.links.R_b);
    f.F_r = psd_factor(sys.links.R_r);
    return f;
}

// Scattered RIS-BS matrix G = R_b^{1/2} U R_r^{1/2}, kept as its inner
// Gaussian block between the low-rank spatial factors.
inline CMatrix draw_scatter(const SnapshotFactors &fac, Rng &rng)
{
    CMatrix U(fac.F_b.cols(), fac.F_r.cols());
    for (Eigen::Index j = 0; j < U.cols(); ++j)
        U.col(j) = std_complex_normal(U.rows(), rng);
    return U;
}

// h_d + (c1 a_b a_r^H + c2 G) w
inline CVector composite_channel(const System &sys, const SnapshotFactors &fac, const CMatrix &U, const CVector &h_d,
                                 const CVector &w)
{
    const LinkGains &g = sys.links.gains;
    const double c1 = std::sqrt(g.beta_rb) * g.eta_rb, c2 = std::sqrt(g.beta_rb) * g.zeta_rb;
    CVector h = h_d + c1 * sys.links.a_r.dot(w) * sys.links.a_b;
    if (c2 > 0.0)
        h += c2 * (fac.F_b * (U * (fac.F_r.adjoint() * w)));
    return h;
}

// Reflected vector Phi h_ur for a design.
inline CVector reflect(const PhaseDesign &p, const CVector &h_ur) { return p.phi.cwiseProduct(h_ur); }

struct MomentAcc
{
    std::vector<double> sa, sb, saa, sbb, sab;
    long n = 0;

    explicit MomentAcc(std::size_t k = 0) : sa(k), sb(k), saa(k), sbb(k), sab(k) {}

    void add(std::size_t k, double a, double b)
    {
        sa[k] += a;
        sb[k] += b;
        saa[k] += a * a;
        sbb[k] += b * b;
        sab[k] += a * b;
    }

    void merge(const MomentAcc &o)
    {
        n += o.n;
        for (std::size_t k = 0; k < sa.size(); ++k)
        {
            sa[k] += o.sa[k];
            sb[k] += o.sb[k];
            saa[k] += o.saa[k];
            sbb[k] += o.sbb[k];
            sab[k] += o.sab[k];
        }
    }

    double corr(std::size_t k) const
    {
        const double m = static_cast<double>(n);
        const double ma = sa[k] / m, mb = sb[k] / m;
        const double va = saa[k] / m - ma * ma, vb = sbb[k] / m - mb * mb;
        return (sab[k] / m - ma * mb) / std::sqrt(va * vb);
    }
};

inline long batch_size(long replicates, long batches = 100)
{
    return std::max(1L, (replicates + batches - 1) / batches);
}

inline double batch_stderr(const std::vector<double> &v)
{
    const double n = static_cast<double>(v.size());
    if (v.size() < 2)
        return 0.0;
    double m = 0.0;
    for (double x : v)
        m += x;
    m /= n;
    double s = 0.0;
    for (double x : v)
        s += (x - m) * (x - m);
    return std::sqrt(s / (n - 1.0) / n);
}

// Sample Pearson correlation of SNR(t), SNR(t + tau) for each (rho_d, rho_ur).
inline std::vector<McEstimate> estimate_snr_corr_rho(const System &sys,
                                                     const std::vector<std::pair<double, double>> &rhos,
                                                     const McConfig &mc)
{
    mc.validate();
    if (!sys.cfg.los_only())
        throw domain_error("estimate_snr_corr: requires a LoS RIS-BS link (kappa = inf)");
    const SnapshotFactors fac = snapshot_factors(sys);
    const LinkGains &g = sys.links.gains;
    const double shift = sys.cfg.tx_snr * SnrCorrModel(sys).mean();
    auto snr = [&](const CVector &hd, const CVector &hu) {
        const double Y = hu.cwiseAbs().sum();
        const cplx nu = unit_phase(sys.links.a_b.dot(hd));
        const CVector h = hd + std::sqrt(g.beta_rb) * nu * Y * sys.links.a_b;
        return sys.cfg.tx_snr * h.squaredNorm() - shift;
    };
    const std::size_t K = rhos.size();
    std::vector<MomentAcc> blocks;
    MomentAcc tot = run_blocks<MomentAcc>(
        mc.replicates, batch_size(mc.replicates), mc.seed, [&] { return MomentAcc(K); },
        [&](MomentAcc &acc, long, Rng &rng) {
            const CVector hd = gen_vector(fac.F_d, g.beta_d, rng);
            const CVector hu = gen_vector(fac.F_ur, g.beta_ur, rng);
            const double s0 = snr(hd, hu);
            for (std::size_t k = 0; k < K; ++k)
            {
                const CVector hd2 = advance(hd, fac.F_d, g.beta_d, rhos[k].first, rng);
                const CVector hu2 = advance(hu, fac.F_ur, g.beta_ur, rhos[k].second, rng);
                acc.add(k, s0, snr(hd2, hu2));
            }
            ++acc.n;
        },
        &blocks);
    std::vector<McEstimate> out(K);
    for (std::size_t k = 0; k < K; ++k)
    {
        std::vector<double> bc;
        for (const auto &b : blocks)
            if (b.n > 1)
                bc.push_back(b.corr(k));
        out[k].value = tot.corr(k);
        out[k].stderr_ = batch_stderr(bc);
        out[k].count = tot.n;
    }
    return out;
}

inline std::vector<McEstimate> estimate_snr_corr(const System &sys, const std::vector<double> &taus, const McConfig &mc)
{
    std::vector<std::pair<double, double>> rhos;
    for (double t : taus)
        rhos.emplace_back(jakes_rho(sys.cfg.f_d, t), jakes_rho(sys.cfg.f_ur, t));
    return estimate_snr_corr_rho(sys, rhos, mc);
}

struct ChannelCorrEstimate
{
    CMatrix D, R_h;
    RMatrix stderr_; // entrywise, of |R_h| components
    std::vector<double> eig_fractions;
    long draws = 0;
};

struct MatrixAcc
{
    CMatrix sum;
    long n = 0;

    explicit MatrixAcc(Eigen::Index M = 0) : sum(CMatrix::Zero(M, M)) {}

    void merge(const MatrixAcc &o)
    {
        sum += o.sum;
        n += o.n;
    }
};

inline CMatrix normalise_covariance(const CMatrix &D)
{
    RVector psi(D.rows());
    for (Eigen::Index i = 0; i < D.rows(); ++i)
        psi(i) = 1.0 / std::sqrt(D(i, i).real());
    return psi.asDiagonal() * D * psi.asDiagonal();
}

inline std::vector<double> eigen_fractions(const CMatrix &R)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (R + R.adjoint()), Eigen::EigenvaluesOnly);
    const RVector &w = es.eigenvalues();
    double tot = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        tot += std::max(0.0, w(i));
    std::vector<double> f;
    for (Eigen::Index i = w.size() - 1; i >= 0; --i)
        f.push_back(std::max(0.0, w(i)) / tot);
    return f;
}

// Sample covariance of the end-to-end channel with the optimal design.
inline ChannelCorrEstimate estimate_channel_corr(const System &sys, const McConfig &mc)
{
    mc.validate();
    const SnapshotFactors fac = snapshot_factors(sys);
    const LinkGains &g = sys.links.gains;
    const int M = sys.cfg.M();
    std::vector<MatrixAcc> blocks;
    MatrixAcc tot = run_blocks<MatrixAcc>(
        mc.replicates, batch_size(mc.replicates), mc.seed, [&] { return MatrixAcc(M); },
        [&](MatrixAcc &acc, long, Rng &rng) {
            const CVector hd = gen_vector(fac.F_d, g.beta_d, rng);
            const CVector hu = gen_vector(fac.F_ur, g.beta_ur, rng);
            const PhaseDesign p = apply_phase_design(hu, hd, sys.links.a_b, sys.links.a_r);
            const CMatrix U = draw_scatter(fac, rng);
            const CVector h = composite_channel(sys, fac, U, hd, reflect(p, hu));
            acc.sum.noalias() += h * h.adjoint();
            ++acc.n;
        },
        &blocks);
    ChannelCorrEstimate e;
    e.draws = tot.n;
    e.D = tot.sum / static_cast<double>(tot.n);
    e.R_h = normalise_covariance(e.D);
    e.stderr_ = RMatrix::Zero(M, M);
    std::vector<CMatrix> rb;
    for (const auto &b : blocks)
        if (b.n > 0)
            rb.push_back(normalise_covariance(b.sum / static_cast<double>(b.n)));
    if (rb.size() > 1)
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j)
            {
                std::vector<double> re, im;
                for (const auto &R : rb)
                {
                    re.push_back(R(i, j).real());
                    im.push_back(R(i, j).imag());
                }
                e.stderr_(i, j) = std::hypot(batch_stderr(re), batch_stderr(im));
            }
    e.eig_fractions = eigen_fractions(e.R_h);
    return e;
}

struct AgeingEstimate
{
    double mean0 = 0;                 // E[SNR(t)]
    std::vector<McEstimate> aged;     // E[SNR(t + tau)]
    std::vector<McEstimate> percent;  // 100 (mean0 - aged) / mean0
};

struct AgeAcc
{
    double s0 = 0;
    std::vector<double> s1;
    long n = 0;

    explicit AgeAcc(std::size_t k = 0) : s1(k) {}

    void merge(const AgeAcc &o)
    {
        s0 += o.s0;
        n += o.n;
        for (std::size_t k = 0; k < s1.size(); ++k)
            s1[k] += o.s1[k];
    }
};

// Phase design frozen at t, links advanced by their exact conditional laws.
inline AgeingEstimate estimate_ageing_rho(const System &sys, const std::vector<std::pair<double, double>> &rhos,
                                          const McConfig &mc)
{
    mc.validate();
    const SnapshotFactors fac = snapshot_factors(sys);
    const LinkGains &g = sys.links.gains;
    const std::size_t K = rhos.size();
    const double tx = sys.cfg.tx_snr;
    std::vector<AgeAcc> blocks;
    AgeAcc tot = run_blocks<AgeAcc>(
        mc.replicates, batch_size(mc.replicates), mc.seed, [&] { return AgeAcc(K); },
        [&](AgeAcc &acc, long, Rng &rng) {
            const CVector hd = gen_vector(fac.F_d, g.beta_d, rng);
            const CVector hu = gen_vector(fac.F_ur, g.beta_ur, rng);
            const PhaseDesign p = apply_phase_design(hu, hd, sys.links.a_b, sys.links.a_r);
            const CMatrix U = draw_scatter(fac, rng); // RIS-BS link held fixed over the lag
            acc.s0 += tx * composite_channel(sys, fac, U, hd, reflect(p, hu)).squaredNorm();
            for (std::size_t k = 0; k < K; ++k)
            {
                const CVector hd2 = advance(hd, fac.F_d, g.beta_d, rhos[k].first, rng);
                const CVector hu2 = advance(hu, fac.F_ur, g.beta_ur, rhos[k].second, rng);
                acc.s1[k] += tx * composite_channel(sys, fac, U, hd2, reflect(p, hu2)).squaredNorm();
            }
            ++acc.n;
        },
        &blocks);
    AgeingEstimate e;
    const double n = static_cast<double>(tot.n);
    e.mean0 = tot.s0 / n;
    for (std::size_t k = 0; k < K; ++k)
    {
        std::vector<double> bm, bp;
        for (const auto &b : blocks)
            if (b.n > 0)
            {
                bm.push_back(b.s1[k] / b.n);
                bp.push_back(100.0 * (b.s0 - b.s1[k]) / b.s0);
            }
        McEstimate a, pc;
        a.value = tot.s1[k] / n;
        a.stderr_ = batch_stderr(bm);
        a.count = tot.n;
        pc.value = 100.0 * (tot.s0 - tot.s1[k]) / tot.s0;
        pc.stderr_ = batch_stderr(bp);
        pc.count = tot.n;
        e.aged.push_back(a);
        e.percent.push_back(pc);
    }
    return e;
}

inline AgeingEstimate estimate_ageing(const System &sys, const std::vector<double> &taus, const McConfig &mc)
{
    std::vector<std::pair<double, double>> rhos;
    for (double t : taus)
        rhos.emplace_back(jakes_rho(sys.cfg.f_d, t), jakes_rho(sys.cfg.f_ur, t));
    return estimate_ageing_rho(sys, rhos, mc);
}

// Mean SNR with the optimal design, from independent snapshots.
inline McEstimate estimate_mean_snr(const System &sys, const McConfig &mc)
{
    const AgeingEstimate e = estimate_ageing_rho(sys, {}, mc);
    McEstimate m;
    m.value = e.mean0;
    m.count = mc.replicates;
    return m;
}

} // namespace ris_sostat::mc
