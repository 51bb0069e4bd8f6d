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
#include "montecarlo.hpp"
#include "scenario_io.hpp"
#include "specfun.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ris_sostat::cli
{

using io::json;

inline constexpr const char *version = "1.0.0";

enum ExitCode : int
{
    exit_ok = 0,
    exit_usage = 2,
    exit_tolerance = 3,
    exit_numeric = 4
};

inline constexpr double nan_v = std::numeric_limits<double>::quiet_NaN();

enum class Kind
{
    Lcr,
    Afd,
    SnrCorr,
    ChanCorr,
    Ageing
};

struct KindSpec
{
    Kind kind = Kind::Lcr;
    mc::SnrMode mode = mc::SnrMode::Full;
    std::string name;
};

struct Options
{
    std::string command;
    std::string scenario;
    std::string kind;
    std::string grid;
    std::string out;
    std::string format = "csv";
    std::string mode;
    std::optional<long> replicates;
    std::optional<std::uint64_t> seed;
    std::optional<double> shadow;
    std::optional<double> tolerance;
    bool deterministic = false;
    int keep = 2;             // eigenvalues kept by the stable direct-link LCR
    double max_work = 2e11;   // runtime guard, in inner-loop operations
};

inline mc::SnrMode parse_mode(const std::string &m)
{
    if (m == "direct")
        return mc::SnrMode::Direct;
    if (m == "ris")
        return mc::SnrMode::RisOnly;
    if (m == "full")
        return mc::SnrMode::Full;
    throw usage_error("--mode must be direct, ris or full");
}

inline KindSpec parse_kind(const std::string &k, const std::string &mode)
{
    KindSpec s;
    s.name = k;
    std::optional<mc::SnrMode> implied;
    if (k == "lcr" || k == "lcr-direct" || k == "lcr-ris" || k == "lcr-full")
        s.kind = Kind::Lcr;
    else if (k == "afd" || k == "afd-direct" || k == "afd-ris" || k == "afd-full")
        s.kind = Kind::Afd;
    else if (k == "snr-corr")
        s.kind = Kind::SnrCorr;
    else if (k == "chan-corr")
        s.kind = Kind::ChanCorr;
    else if (k == "ageing")
        s.kind = Kind::Ageing;
    else
        throw usage_error("unknown --kind \"" + k +
                          "\" (lcr-direct, lcr-ris, lcr, afd-direct, afd-ris, afd, snr-corr, chan-corr, ageing)");
    if (k.size() > 4 && (s.kind == Kind::Lcr || s.kind == Kind::Afd))
        implied = parse_mode(k.substr(4));
    if (s.kind == Kind::Lcr || s.kind == Kind::Afd)
    {
        if (implied && !mode.empty() && parse_mode(mode) != *implied)
            throw usage_error("--mode " + mode + " contradicts --kind " + k);
        s.mode = implied ? *implied : (mode.empty() ? mc::SnrMode::Full : parse_mode(mode));
    }
    else if (!mode.empty())
        throw usage_error("--mode applies to lcr and afd kinds only");
    return s;
}

inline io::GridSpec::Axis kind_axis(Kind k)
{
    switch (k)
    {
    case Kind::Lcr:
    case Kind::Afd: return io::GridSpec::Axis::ThresholdsDb;
    case Kind::ChanCorr: return io::GridSpec::Axis::Rho;
    default: return io::GridSpec::Axis::TausNorm;
    }
}

inline io::GridSpec default_grid(Kind k)
{
    io::GridSpec g;
    g.axis = kind_axis(k);
    switch (k)
    {
    case Kind::Lcr:
    case Kind::Afd: g.lo = -20.0, g.hi = 6.0, g.step = 1.0; break;
    case Kind::SnrCorr: g.lo = 0.0, g.hi = 0.975, g.step = 0.025; break;
    case Kind::Ageing: g.lo = 0.0, g.hi = 1.0, g.step = 0.01; break;
    case Kind::ChanCorr: g.axis = io::GridSpec::Axis::None; break;
    }
    return g;
}

inline io::GridSpec parse_grid_flag(const std::string &text, io::GridSpec::Axis axis)
{
    io::GridSpec g;
    g.axis = axis;
    std::vector<double> v;
    std::size_t start = 0;
    try
    {
        while (true)
        {
            const std::size_t end = text.find(':', start);
            const std::string part = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
            std::size_t used = 0;
            v.push_back(std::stod(part, &used));
            if (used != part.size())
                throw std::invalid_argument(part);
            if (end == std::string::npos)
                break;
            start = end + 1;
        }
    }
    catch (const std::exception &)
    {
        throw usage_error("--grid must be lo:hi:step, got \"" + text + "\"");
    }
    if (v.size() != 3)
        throw usage_error("--grid must be lo:hi:step, got \"" + text + "\"");
    g.lo = v[0], g.hi = v[1], g.step = v[2];
    io::check_grid(g);
    return g;
}

// ------------------------------------------------------------------------
// Tables

struct Table
{
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<json> extras; // per-row structured data for JSON output

    std::size_t col(const std::string &name) const
    {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end())
            throw std::logic_error("Table: no column " + name);
        return static_cast<std::size_t>(it - columns.begin());
    }
};

inline std::string format_cell(double v)
{
    if (std::isnan(v))
        return "";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline void write_csv(std::ostream &os, const json &header, const Table &t)
{
    os << "# " << header.dump() << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        os << (i ? "," : "") << t.columns[i];
    os << "\n";
    for (const auto &r : t.rows)
    {
        for (std::size_t i = 0; i < r.size(); ++i)
            os << (i ? "," : "") << format_cell(r[i]);
        os << "\n";
    }
}

inline void write_json(std::ostream &os, const json &header, const Table &t)
{
    json doc;
    doc["header"] = header;
    doc["records"] = json::array();
    for (std::size_t k = 0; k < t.rows.size(); ++k)
    {
        json rec;
        for (std::size_t i = 0; i < t.columns.size(); ++i)
        {
            const double v = t.rows[k][i];
            if (std::isnan(v))
                rec[t.columns[i]] = nullptr;
            else if (std::isinf(v))
                rec[t.columns[i]] = v > 0 ? "inf" : "-inf";
            else
                rec[t.columns[i]] = v;
        }
        if (k < t.extras.size() && !t.extras[k].is_null())
            for (auto it = t.extras[k].begin(); it != t.extras[k].end(); ++it)
                rec[it.key()] = it.value();
        doc["records"].push_back(rec);
    }
    os << doc.dump(2) << "\n";
}

// Header of an emitted file back to its scenario: a CSV whose first line is
// "# {json}", or a JSON document with a "header" block.
inline io::Scenario scenario_from_output(const std::string &text)
{
    json header;
    if (text.rfind("# ", 0) == 0)
        header = json::parse(text.substr(2, text.find('\n') - 2));
    else
        header = json::parse(text).at("header");
    return io::scenario_from_json(header.at("scenario"));
}

// ------------------------------------------------------------------------
// Evaluation

struct Job
{
    io::Scenario scen;
    KindSpec kind;
    io::GridSpec grid;
    bool with_mc = false;
    bool with_check = false;
    std::optional<double> tolerance;
    int keep = 2;
    double max_work = 2e11;
    std::string shadowed; // link whose power was scaled, if any
};

struct Outcome
{
    Table table;
    bool checked = false;
    bool pass = true;
    long checked_points = 0;
};

inline double mode_mean(const System &sys, mc::SnrMode m)
{
    switch (m)
    {
    case mc::SnrMode::Direct: return direct_spectrum(sys).mean();
    case mc::SnrMode::RisOnly: return ris_snr_scale(sys) * moments_Y(sys.links.R_ur, sys.links.gains.beta_ur).EY2;
    default: return SnrCorrModel(sys).mean();
    }
}

// Inner-loop operation count of an MC run, for the runtime guard.
inline double mc_work(const Job &job, const System &sys, std::size_t points)
{
    const mc::McConfig &m = job.scen.mc;
    const double reps = static_cast<double>(m.replicates);
    const double M = sys.cfg.M(), N = sys.cfg.N();
    switch (job.kind.kind)
    {
    case Kind::Lcr:
    case Kind::Afd:
    {
        const mc::SeriesPlan p = mc::plan_series(sys.cfg, job.kind.mode, m);
        double procs = 0.0;
        if (job.kind.mode != mc::SnrMode::RisOnly)
            procs += static_cast<double>(psd_factor(sys.links.R_d).cols());
        if (job.kind.mode != mc::SnrMode::Direct)
            procs += static_cast<double>(psd_factor(sys.links.R_ur).cols());
        return reps * p.samples * (procs * (m.sos_count + M + N) + points);
    }
    case Kind::SnrCorr:
    case Kind::Ageing: return reps * (points + 1) * (N * N + M * M + M * N);
    case Kind::ChanCorr: return reps * std::max<std::size_t>(points, 1) * (N * N + M * N + M * M);
    }
    return 0.0;
}

inline void guard_budget(const Job &job, const System &sys, std::size_t points)
{
    const double w = mc_work(job, sys, points);
    if (w > job.max_work)
    {
        const long fit = std::max(1L, static_cast<long>(job.scen.mc.replicates * job.max_work / w));
        std::ostringstream os;
        os << "estimated Monte Carlo work " << std::setprecision(3) << w << " exceeds the cap " << job.max_work
           << "; use --replicates " << fit << " or raise --max-work";
        throw usage_error(os.str());
    }
}

inline double default_tolerance(const KindSpec &k)
{
    switch (k.kind)
    {
    case Kind::Lcr: return 0.15;
    case Kind::Afd: return k.mode == mc::SnrMode::RisOnly ? 0.10 : 0.15;
    case Kind::SnrCorr: return 0.03;
    case Kind::ChanCorr: return 0.02;
    case Kind::Ageing: return 2.0; // percentage points
    }
    return 0.0;
}

inline constexpr long min_crossings = 100;

inline Outcome eval_crossings(const Job &job)
{
    const System sys = make_system(job.scen.cfg);
    const mc::SnrMode mode = job.kind.mode;
    const bool is_lcr = job.kind.kind == Kind::Lcr;
    if (mode != mc::SnrMode::Direct && !sys.cfg.los_only())
        throw usage_error("--kind " + job.kind.name + " with mode " + mc::mode_name(mode) +
                          " needs a LoS RIS-BS link (ricean.kappa = \"inf\")");
    const std::vector<double> db = job.grid.points();
    const double mean = mode_mean(sys, mode);
    const double f_ref = mc::reference_doppler(sys.cfg, mode);
    std::vector<double> th;
    for (double d : db)
        th.push_back(mean * std::pow(10.0, d / 10.0));

    Outcome o;
    Table &t = o.table;
    t.columns = {"snr_db_rel_mean", "threshold", "analytic", "analytic_exact", "analytic_norm",
                 "mc",              "mc_norm",   "mc_stderr", "mc_count"};
    if (job.with_check)
        t.columns.insert(t.columns.end(), {"rel_err", "pass"});

    std::optional<mc::CrossingResult> r;
    if (job.with_mc)
    {
        guard_budget(job, sys, th.size());
        r = mc::estimate_crossings(sys, mode, job.scen.mc, th);
    }

    std::optional<EigenSpectrum> sp;
    YMoments ym;
    double om2 = 0, c = 0;
    if (mode == mc::SnrMode::Direct)
        sp = direct_spectrum(sys);
    if (mode == mc::SnrMode::RisOnly)
    {
        ym = moments_Y(sys.links.R_ur, sys.links.gains.beta_ur);
        om2 = omega2(sys.links.R_ur, sys.links.gains.beta_ur, sys.cfg.f_ur);
        c = ris_snr_scale(sys);
    }
    const double tol = job.tolerance.value_or(default_tolerance(job.kind));

    for (std::size_t k = 0; k < th.size(); ++k)
    {
        const double T = th[k];
        double a = nan_v, ex = nan_v;
        if (sp)
        {
            const int M = static_cast<int>(sp->theta.size());
            const int L = std::min(job.keep, M - 1);
            if (is_lcr)
            {
                a = (M == 1) ? lcr_direct_exact(*sp, sys.cfg.f_d, T) : lcr_direct_stable(*sp, L, sys.cfg.f_d, T);
                try
                {
                    ex = lcr_direct_exact(*sp, sys.cfg.f_d, T);
                }
                catch (const precision_error &)
                {
                }
            }
            else
                a = afd_direct(*sp, sys.cfg.f_d, T, std::max(1, L));
        }
        else if (mode == mc::SnrMode::RisOnly)
            a = is_lcr ? lcr_ris(T, ym.fit, om2, c) : afd_ris(T, ym.fit, om2, c);
        const double norm = is_lcr ? 1.0 / f_ref : f_ref;
        std::vector<double> row{db[k], T, a, ex, a * norm, nan_v, nan_v, nan_v, nan_v};
        if (r)
        {
            const mc::McEstimate &e = is_lcr ? r->lcr[k] : r->afd[k];
            row[5] = e.value;
            row[6] = e.value * norm;
            row[7] = e.stderr_;
            row[8] = static_cast<double>(e.count);
        }
        if (job.with_check)
        {
            double rel = nan_v, pass = nan_v;
            if (r && !std::isnan(a) && row[8] >= min_crossings)
            {
                rel = a / row[5] - 1.0;
                pass = std::fabs(rel) <= tol ? 1.0 : 0.0;
                o.checked = true;
                ++o.checked_points;
                o.pass = o.pass && pass == 1.0;
            }
            row.push_back(rel);
            row.push_back(pass);
        }
        t.rows.push_back(row);
    }
    return o;
}

inline Outcome eval_snr_corr(const Job &job)
{
    const System sys = make_system(job.scen.cfg);
    if (!sys.cfg.los_only())
        throw usage_error("--kind snr-corr needs a LoS RIS-BS link (ricean.kappa = \"inf\")");
    const std::vector<double> ft = job.grid.points();
    std::vector<double> taus;
    for (double x : ft)
        taus.push_back(x / sys.cfg.f_d);
    const SnrCorrModel model(sys);
    Outcome o;
    Table &t = o.table;
    t.columns = {"f_tau", "tau_s", "analytic", "mc", "mc_stderr", "mc_count"};
    if (job.with_check)
        t.columns.insert(t.columns.end(), {"abs_err", "pass"});
    std::vector<mc::McEstimate> e;
    if (job.with_mc)
    {
        guard_budget(job, sys, taus.size());
        e = mc::estimate_snr_corr(sys, taus, job.scen.mc);
    }
    const double tol = job.tolerance.value_or(default_tolerance(job.kind));
    for (std::size_t k = 0; k < taus.size(); ++k)
    {
        const double a = model.correlation_at(taus[k]);
        std::vector<double> row{ft[k], taus[k], a, nan_v, nan_v, nan_v};
        if (!e.empty())
        {
            row[3] = e[k].value;
            row[4] = e[k].stderr_;
            row[5] = static_cast<double>(e[k].count);
        }
        if (job.with_check)
        {
            const double d = e.empty() ? nan_v : a - e[k].value;
            const double pass = e.empty() ? nan_v : (std::fabs(d) <= tol ? 1.0 : 0.0);
            if (!e.empty())
            {
                o.checked = true;
                ++o.checked_points;
                o.pass = o.pass && pass == 1.0;
            }
            row.push_back(d);
            row.push_back(pass);
        }
        t.rows.push_back(row);
    }
    return o;
}

inline Outcome eval_ageing(const Job &job)
{
    const System sys = make_system(job.scen.cfg);
    const std::vector<double> ft = job.grid.points();
    std::vector<double> taus;
    for (double x : ft)
        taus.push_back(x / sys.cfg.f_d);
    const AgeingModel model(sys);
    Outcome o;
    Table &t = o.table;
    t.columns = {"f_tau", "tau_s", "analytic_percent", "analytic_loss", "mc", "mc_stderr", "mc_count"};
    if (job.with_check)
        t.columns.insert(t.columns.end(), {"abs_err", "pass"});
    std::optional<mc::AgeingEstimate> e;
    if (job.with_mc)
    {
        guard_budget(job, sys, taus.size());
        e = mc::estimate_ageing(sys, taus, job.scen.mc);
    }
    const double tol = job.tolerance.value_or(default_tolerance(job.kind));
    for (std::size_t k = 0; k < taus.size(); ++k)
    {
        const AgeingLoss a = ageing_loss(model, taus[k]);
        std::vector<double> row{ft[k], taus[k], a.percent, a.absolute, nan_v, nan_v, nan_v};
        if (e)
        {
            row[4] = e->percent[k].value;
            row[5] = e->percent[k].stderr_;
            row[6] = static_cast<double>(e->percent[k].count);
        }
        if (job.with_check)
        {
            const double d = e ? a.percent - e->percent[k].value : nan_v;
            const double pass = e ? (std::fabs(d) <= tol ? 1.0 : 0.0) : nan_v;
            if (e)
            {
                o.checked = true;
                ++o.checked_points;
                o.pass = o.pass && pass == 1.0;
            }
            row.push_back(d);
            row.push_back(pass);
        }
        t.rows.push_back(row);
    }
    return o;
}

inline json abs_matrix(const CMatrix &R)
{
    json m = json::array();
    for (Eigen::Index i = 0; i < R.rows(); ++i)
    {
        json row = json::array();
        for (Eigen::Index j = 0; j < R.cols(); ++j)
            row.push_back(std::abs(R(i, j)));
        m.push_back(row);
    }
    return m;
}

inline Outcome eval_chan_corr(const Job &job)
{
    std::vector<double> rhos = job.grid.points();
    const bool sweep = !rhos.empty();
    if (!sweep)
        rhos.push_back(job.scen.cfg.spatial.kind == SpatialKind::Exponential ? job.scen.cfg.spatial.rho : nan_v);
    Outcome o;
    Table &t = o.table;
    t.columns = {"rho",   "analytic_S", "analytic_eig1", "analytic_eig2", "analytic_eig3", "mc_S",
                 "mc_eig1", "mc_eig2",  "mc_eig3",       "mc_max_abs_err", "mc_max_stderr", "mc_count"};
    if (job.with_check)
        t.columns.insert(t.columns.end(), {"pass"});
    const double tol = job.tolerance.value_or(default_tolerance(job.kind));
    for (double rho : rhos)
    {
        ScenarioConfig cfg = job.scen.cfg;
        if (sweep)
            cfg.spatial = SpatialModel{SpatialKind::Exponential, rho};
        const System sys = make_system(cfg);
        const ChannelCorrResult a = channel_corr(sys);
        auto eig = [](const std::vector<double> &f, std::size_t i) { return i < f.size() ? f[i] : 0.0; };
        std::vector<double> row{rho,
                                a.S_metric,
                                eig(a.eig_fractions, 0),
                                eig(a.eig_fractions, 1),
                                eig(a.eig_fractions, 2),
                                nan_v,
                                nan_v,
                                nan_v,
                                nan_v,
                                nan_v,
                                nan_v,
                                nan_v};
        json extra;
        extra["analytic_R_h_abs"] = abs_matrix(a.R_h);
        if (job.with_mc)
        {
            guard_budget(job, sys, 1);
            const mc::ChannelCorrEstimate e = mc::estimate_channel_corr(sys, job.scen.mc);
            const int M = sys.cfg.M();
            row[5] = e.R_h.cwiseAbs().sum() / (static_cast<double>(M) * M);
            row[6] = eig(e.eig_fractions, 0);
            row[7] = eig(e.eig_fractions, 1);
            row[8] = eig(e.eig_fractions, 2);
            row[9] = (e.R_h - a.R_h).cwiseAbs().maxCoeff();
            row[10] = e.stderr_.maxCoeff();
            row[11] = static_cast<double>(e.draws);
            extra["mc_R_h_abs"] = abs_matrix(e.R_h);
        }
        if (job.with_check)
        {
            double pass = nan_v;
            if (job.with_mc)
            {
                pass = row[9] <= tol ? 1.0 : 0.0;
                o.checked = true;
                ++o.checked_points;
                o.pass = o.pass && pass == 1.0;
            }
            row.push_back(pass);
        }
        t.rows.push_back(row);
        t.extras.push_back(extra);
    }
    return o;
}

inline Outcome evaluate(const Job &job)
{
    switch (job.kind.kind)
    {
    case Kind::Lcr:
    case Kind::Afd: return eval_crossings(job);
    case Kind::SnrCorr: return eval_snr_corr(job);
    case Kind::Ageing: return eval_ageing(job);
    case Kind::ChanCorr: return eval_chan_corr(job);
    }
    throw std::logic_error("evaluate: unhandled kind");
}

// Scales the stronger of the two links by s and names it.
inline std::string shadow_dominant(ScenarioConfig &cfg, double s)
{
    if (!(s > 0.0 && s <= 1.0))
        throw usage_error("--shadow-dominant must lie in (0, 1]");
    const System sys = make_system(cfg);
    const double direct = sys.cfg.tx_snr * sys.cfg.M() * sys.links.gains.beta_d;
    const YMoments ym = moments_Y(sys.links.R_ur, sys.links.gains.beta_ur);
    const double ris = ris_snr_scale(sys) * ym.EY2;
    if (direct >= ris)
    {
        cfg.direct_gain_scale *= s;
        return "direct";
    }
    cfg.ris_gain_scale *= s;
    return "ris";
}

inline std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

inline json make_header(const Options &opt, const Job &job, const Table &t)
{
    json h;
    h["tool"] = "ris-sostat";
    h["version"] = version;
    h["command"] = opt.command;
    h["kind"] = job.kind.name;
    if (job.kind.kind == Kind::Lcr || job.kind.kind == Kind::Afd)
    {
        h["mode"] = mc::mode_name(job.kind.mode);
        h["abscissa"] = "snr_db_rel_mean";
        h["units"] = job.kind.kind == Kind::Lcr ? "crossings/s; _norm columns divided by f_m"
                                                : "seconds; _norm columns multiplied by f_m";
        h["f_m"] = mc::reference_doppler(job.scen.cfg, job.kind.mode);
        h["keep"] = job.keep;
    }
    else if (job.kind.kind == Kind::ChanCorr)
        h["abscissa"] = "rho";
    else
        h["abscissa"] = "f_tau";
    if (!job.shadowed.empty())
        h["shadowed_link"] = job.shadowed;
    io::Scenario s = job.scen;
    s.grid = job.grid;
    h["scenario"] = io::scenario_to_json(s);
    h["config_hash"] = io::config_hash(s);
    h["seed"] = s.mc.seed;
    h["replicates"] = s.mc.replicates;
    h["monte_carlo"] = job.with_mc;
    h["columns"] = t.columns;
    if (job.with_check)
        h["tolerance"] = job.tolerance.value_or(default_tolerance(job.kind));
    if (!opt.deterministic)
        h["timestamp"] = utc_timestamp();
    return h;
}

// ------------------------------------------------------------------------
// Self test

struct Check
{
    std::string name;
    double deviation = 0, tolerance = 0;
    bool pass() const { return std::isfinite(deviation) && deviation <= tolerance; }
};

inline std::vector<Check> selftest_checks()
{
    using namespace specfun;
    const double pi = std::numbers::pi;
    std::vector<Check> out;
    auto add = [&](const std::string &n, double dev, double tol) { out.push_back({n, std::fabs(dev), tol}); };

    add("2F1(-1/2,-1/2;1;1) = 4/pi", hyp2f1(-0.5, -0.5, 1.0, 1.0) - 4.0 / pi, 1e-10);
    add("2F1(1/2,1/2;2;1) = 4/pi", hyp2f1(0.5, 0.5, 2.0, 1.0) - 4.0 / pi, 1e-10);
    {
        // plain series at z = 0.7 against the elliptic branch
        long double term = 1.0L, sum = 1.0L;
        for (int n = 0; n < 400; ++n)
        {
            term *= (-0.5L + n) * (-0.5L + n) / ((1.0L + n) * (n + 1.0L)) * 0.7L;
            sum += term;
        }
        add("2F1(-1/2,-1/2;1;0.7) series vs closed form", hyp2f1(-0.5, -0.5, 1.0, 0.7) - static_cast<double>(sum),
            1e-10);
    }
    add("K(0) = pi/2", elliptic_k(0.0) - pi / 2.0, 1e-14);
    add("E(1) = 1", elliptic_e(1.0) - 1.0, 1e-14);
    {
        long double term = 1.0L, sum = 1.0L;
        for (int n = 0; n < 200; ++n)
        {
            term *= (1.0L + n) / ((2.5L + n) * (n + 1.0L)) * -3.0L;
            sum += term;
        }
        add("1F1(1;5/2;-3) Kummer vs series", hyp1f1(1.0, 2.5, -3.0) - static_cast<double>(sum), 1e-10);
    }
    add("J0 first root", bessel_j0(2.404825557695773), 1e-12);
    add("P(1,x) = 1 - e^-x", reg_lower_incomplete_gamma(1.0, 0.8) + std::expm1(-0.8), 1e-14);

    {
        const int N = 16;
        const YMoments m = moments_Y(CMatrix::Identity(N, N), 1.0);
        add("E[Y] i.i.d.", m.EY - N * std::sqrt(pi) / 2.0, 1e-10);
        add("Var[Y] i.i.d.", m.VarY - N * (1.0 - pi / 4.0), 1e-10);
        add("omega2(I) = pi^2 f^2 beta N", omega2(CMatrix::Identity(N, N), 2.0, 3.0) / (pi * pi * 9.0 * 2.0 * N) - 1.0,
            1e-12);
        ChiSquareStyleFit c = m.chi;
        c.gamma_corr = 0.0;
        add("gamma = 0 factorises E[Y Y'^2]", chi_cross12(c) / (chi_moment(c, 1) * chi_moment(c, 2)) - 1.0, 1e-10);
        c.gamma_corr = 1.0;
        add("gamma = 1 gives E[Y^3]", chi_cross12(c) / chi_moment(c, 3) - 1.0, 1e-10);
        add("gamma = 1 gives E[Y^4]", chi_cross22(c) / chi_moment(c, 4) - 1.0, 1e-10);
    }
    add("gamma shape of one Rayleigh amplitude", moments_Y(CMatrix::Identity(1, 1), 1.0).fit.shape_r - 3.659792366325487,
        1e-9);

    ScenarioConfig los;
    los.M_x = 4, los.M_z = 2, los.N_x = 8, los.N_z = 4;
    los.kappa_rb = std::numeric_limits<double>::infinity();
    const System sl = make_system(los);
    add("rho_SNR(0) = 1", snr_correlation(sl, 0.0) - 1.0, 1e-12);
    ScenarioConfig ric = los;
    ric.kappa_rb = 1.0;
    const System sr = make_system(ric);
    add("aged mean at tau = 0 (Ricean)", mean_snr_aged(sr, 0.0) / mean_snr(sr) - 1.0, 1e-12);
    add("aged mean at tau = 0 (LoS) vs SNR-correlation mean", mean_snr(sl) / SnrCorrModel(sl).mean() - 1.0, 1e-9);
    {
        const EigenSpectrum sp = direct_spectrum(sl);
        const double T = 0.5 * sp.mean();
        add("AFD * LCR = CDF (direct)",
            afd_direct(sp, 10.0, T) * lcr_direct_stable(sp, 2, 10.0, T) / cdf_direct(sp, T) - 1.0, 1e-9);
        const YMoments ym = moments_Y(sl.links.R_ur, sl.links.gains.beta_ur);
        const double c = ris_snr_scale(sl), om = omega2(sl.links.R_ur, sl.links.gains.beta_ur, 5.0);
        const double Tr = 0.5 * c * ym.EY2;
        add("AFD * LCR = CDF (RIS)", afd_ris(Tr, ym.fit, om, c) * lcr_ris(Tr, ym.fit, om, c) / cdf_snr_ris(Tr, ym.fit, c) - 1.0,
            1e-9);
        add("RIS LCR = sqrt(2 c T omega2 / pi) f_SNR",
            lcr_ris(Tr, ym.fit, om, c) / (std::sqrt(2.0 * c * Tr * om / pi) * pdf_snr_ris(Tr, ym.fit, c)) - 1.0, 1e-10);
    }
    {
        const EigenSpectrum sp = make_spectrum({3.0, 2.2, 1.5, 1.0, 0.6, 0.3});
        double worst = 0.0;
        for (double x : {0.05, 0.3, 1.0, 2.0, 5.0})
        {
            const double T = x * sp.mean();
            worst = std::max(worst, std::fabs(lcr_direct_stable(sp, 5, 1.0, T) / lcr_direct_exact(sp, 1.0, T) - 1.0));
        }
        add("stable (L = M - 1) vs exact LCR, M = 6", worst, 1e-4);
    }
    {
        ScenarioConfig e = ric;
        e.spatial = SpatialModel{SpatialKind::Exponential, 1.0};
        const ChannelCorrResult r = channel_corr(make_system(e));
        add("rank 2 at exponential rho = 1", r.eig_fractions.size() > 2 ? r.eig_fractions[2] : 0.0, 1e-8);
        const ChannelCorrResult r0 = channel_corr(sr);
        add("R_h unit diagonal", (r0.R_h.diagonal().array() - 1.0).abs().maxCoeff(), 1e-12);
        add("R_h Hermitian", (r0.R_h - r0.R_h.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    }
    {
        double worst = 0.0;
        const CMatrix R = spatial_correlation(8, 4, 0.1, SpatialModel{});
        const CMatrix S = psd_sqrt(R);
        worst = (S * S - R).cwiseAbs().maxCoeff();
        add("psd_sqrt squares back (sinc 8x4, 0.1)", worst, 1e-9);
    }
    return out;
}

inline int cmd_selftest(std::ostream &out)
{
    const std::vector<Check> checks = selftest_checks();
    bool ok = true;
    std::size_t w = 0;
    for (const auto &c : checks)
        w = std::max(w, c.name.size());
    for (const auto &c : checks)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%10.3e  %8.1e  ", c.deviation, c.tolerance);
        out << std::left << std::setw(static_cast<int>(w)) << c.name << "  " << buf << (c.pass() ? "PASS" : "FAIL")
            << "\n";
        ok = ok && c.pass();
    }
    out << (ok ? "selftest: all checks passed\n" : "selftest: FAILED\n");
    return ok ? exit_ok : exit_tolerance;
}

// ------------------------------------------------------------------------
// Entry point

inline int run_command(const Options &opt, std::ostream &out, std::ostream &err)
{
    if (opt.command == "selftest")
        return cmd_selftest(out);
    if (opt.kind.empty())
        throw usage_error(opt.command + " needs --kind");
    if (opt.format != "csv" && opt.format != "json")
        throw usage_error("--format must be csv or json");

    Job job;
    job.kind = parse_kind(opt.kind, opt.mode);
    job.scen = opt.scenario.empty() ? io::Scenario{} : io::load_scenario(opt.scenario);
    if (opt.replicates)
        job.scen.mc.replicates = *opt.replicates;
    if (opt.seed)
        job.scen.mc.seed = *opt.seed;
    try
    {
        job.scen.mc.validate();
    }
    catch (const domain_error &e)
    {
        throw usage_error(e.what());
    }
    if (opt.shadow)
        job.shadowed = shadow_dominant(job.scen.cfg, *opt.shadow);
    const io::GridSpec::Axis axis = kind_axis(job.kind.kind);
    if (!opt.grid.empty())
        job.grid = parse_grid_flag(opt.grid, axis);
    else if (job.scen.grid.axis != io::GridSpec::Axis::None)
    {
        if (job.scen.grid.axis != axis)
            throw usage_error(std::string("scenario grid ") + io::axis_key(job.scen.grid.axis) + " does not suit --kind " +
                              opt.kind);
        job.grid = job.scen.grid;
    }
    else
        job.grid = default_grid(job.kind.kind);
    if (job.kind.kind == Kind::ChanCorr && job.grid.axis != io::GridSpec::Axis::None)
        for (double r : job.grid.points())
            if (!(r >= 0.0 && r <= 1.0))
                throw usage_error("chan-corr grid: rho must lie in [0, 1]");
    if ((job.kind.kind == Kind::Lcr || job.kind.kind == Kind::Afd) && job.kind.mode == mc::SnrMode::Full &&
        opt.command == "compare")
        throw usage_error("compare: full mode has no closed form, use simulate");
    job.with_mc = opt.command != "analytic";
    job.with_check = opt.command == "compare";
    job.tolerance = opt.tolerance;
    if (opt.keep < 1)
        throw usage_error("--keep must be >= 1");
    job.keep = opt.keep;
    job.max_work = opt.max_work;

    const Outcome o = evaluate(job);
    const json header = make_header(opt, job, o.table);

    std::ofstream file;
    std::ostream *os = &out;
    if (!opt.out.empty())
    {
        file.open(opt.out, std::ios::binary);
        if (!file)
            throw usage_error("cannot write " + opt.out);
        os = &file;
    }
    if (opt.format == "csv")
        write_csv(*os, header, o.table);
    else
        write_json(*os, header, o.table);

    if (job.with_check)
    {
        if (!o.checked)
        {
            err << "compare: no grid point qualified for checking\n";
            return exit_tolerance;
        }
        err << "compare: " << o.checked_points << " points checked, " << (o.pass ? "PASS" : "FAIL") << "\n";
        return o.pass ? exit_ok : exit_tolerance;
    }
    return exit_ok;
}

inline int run(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr)
{
    Options opt;
    CLI::App app{"Second-order statistics of RIS-assisted fading channels", "ris-sostat"};
    app.set_version_flag("--version", version);
    app.add_option("command", opt.command, "analytic | simulate | compare | selftest")
        ->required()
        ->check(CLI::IsMember({"analytic", "simulate", "compare", "selftest"}));
    app.add_option("--scenario", opt.scenario, "scenario JSON file (defaults otherwise)");
    app.add_option("--kind", opt.kind, "lcr-direct, lcr-ris, lcr, afd-direct, afd-ris, afd, snr-corr, chan-corr, ageing");
    app.add_option("--grid", opt.grid, "lo:hi:step (dB rel. mean, f_d tau, or rho)");
    app.add_option("--out", opt.out, "output file (stdout otherwise)");
    app.add_option("--format", opt.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--mode", opt.mode, "direct, ris or full (lcr / afd kinds)");
    app.add_option("--replicates", opt.replicates, "Monte Carlo replicates");
    app.add_option("--seed", opt.seed, "Monte Carlo seed");
    app.add_option("--shadow-dominant", opt.shadow, "scale the dominant link's power by this factor");
    app.add_option("--tolerance", opt.tolerance, "compare: override the acceptance tolerance");
    app.add_option("--keep", opt.keep, "eigenvalues kept by the stable direct-link LCR")->capture_default_str();
    app.add_option("--max-work", opt.max_work, "runtime guard for Monte Carlo runs")->capture_default_str();
    app.add_flag("--deterministic", opt.deterministic, "omit the timestamp from the output header");
    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        out << app.help();
        return exit_ok;
    }
    catch (const CLI::CallForVersion &e)
    {
        out << version << "\n";
        return exit_ok;
    }
    catch (const CLI::ParseError &e)
    {
        err << "ris-sostat: " << e.what() << "\n";
        return exit_usage;
    }
    try
    {
        return run_command(opt, out, err);
    }
    catch (const usage_error &e)
    {
        err << "ris-sostat: " << e.what() << "\n";
        return exit_usage;
    }
    catch (const domain_error &e)
    {
        err << "ris-sostat: " << e.what() << "\n";
        return exit_usage;
    }
    catch (const json::exception &e)
    {
        err << "ris-sostat: " << e.what() << "\n";
        return exit_usage;
    }
    catch (const std::exception &e)
    {
        err << "ris-sostat: numeric failure: " << e.what() << "\n";
        return exit_numeric;
    }
}

} // namespace ris_sostat::cli
