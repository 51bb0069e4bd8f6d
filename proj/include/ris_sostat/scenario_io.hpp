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
#include "montecarlo.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ris_sostat::io
{

using json = nlohmann::ordered_json;

struct GridSpec
{
    enum class Axis
    {
        None,
        ThresholdsDb, // relative to the mean SNR
        TausNorm,     // f_d tau
        Rho           // exponential spatial correlation
    };
    Axis axis = Axis::None;
    double lo = 0, hi = 0, step = 0;

    std::vector<double> points() const
    {
        std::vector<double> v;
        if (axis == Axis::None)
            return v;
        const long n = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
        for (long i = 0; i < n; ++i)
            v.push_back(lo + i * step);
        return v;
    }

    bool operator==(const GridSpec &) const = default;
};

inline const char *axis_key(GridSpec::Axis a)
{
    switch (a)
    {
    case GridSpec::Axis::ThresholdsDb: return "thresholds_db";
    case GridSpec::Axis::TausNorm: return "taus_norm";
    case GridSpec::Axis::Rho: return "rho";
    default: return "";
    }
}

inline void check_grid(const GridSpec &g)
{
    if (g.axis == GridSpec::Axis::None)
        return;
    if (!std::isfinite(g.lo) || !std::isfinite(g.hi) || !(g.step > 0.0) || g.hi < g.lo)
        throw usage_error("grid: need finite lo <= hi and step > 0");
    if ((g.hi - g.lo) / g.step > 1e6)
        throw usage_error("grid: more than 1e6 points");
}

struct Scenario
{
    ScenarioConfig cfg;
    mc::McConfig mc;
    GridSpec grid;
};

struct LayoutPreset
{
    double d_x, d_y, d_rb;
};

// System layouts A to D
inline const std::map<std::string, LayoutPreset> &layouts()
{
    static const std::map<std::string, LayoutPreset> m{
        {"A", {27.0, 5.0, 40.0}}, {"B", {20.0, 5.0, 40.0}}, {"C", {35.0, 5.0, 40.0}}, {"D", {29.0, 5.0, 40.0}}};
    return m;
}

namespace detail
{

inline void reject_unknown(const json &j, const std::set<std::string> &allowed, const std::string &where)
{
    if (!j.is_object())
        throw usage_error("scenario: " + where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw usage_error("scenario: unknown key \"" + it.key() + "\" in " + where);
}

inline double num(const json &j, const std::string &key, const std::string &where)
{
    if (!j.is_number())
        throw usage_error("scenario: " + where + "." + key + " must be a number");
    return j.get<double>();
}

inline int count(const json &j, const std::string &key, const std::string &where)
{
    if (!j.is_number_integer())
        throw usage_error("scenario: " + where + "." + key + " must be an integer");
    return j.get<int>();
}

inline double number_or_inf(const json &j, const std::string &what)
{
    if (j.is_string() && j.get<std::string>() == "inf")
        return std::numeric_limits<double>::infinity();
    if (!j.is_number())
        throw usage_error("scenario: " + what + " must be a number or \"inf\"");
    return j.get<double>();
}

} // namespace detail

// Parses a scenario document. Absent keys keep the defaults of ScenarioConfig / McConfig.
inline Scenario scenario_from_json(const json &doc)
{
    using detail::count;
    using detail::num;
    detail::reject_unknown(doc,
                           {"geometry", "layout", "spatial_model", "ricean", "doppler", "tx_snr_db", "tx_snr",
                            "link_scale", "mc", "grid"},
                           "scenario");
    Scenario s;
    ScenarioConfig &c = s.cfg;

    if (doc.contains("geometry"))
    {
        const json &g = doc["geometry"];
        detail::reject_unknown(g,
                               {"M_x", "M_z", "N_x", "N_z", "d_b", "d_r", "h_b", "h_r", "h_u", "alpha_d", "alpha_rb",
                                "alpha_ur", "f_c", "phi_D", "theta_D", "phi_A", "theta_A", "path_loss_distance"},
                               "geometry");
        std::map<std::string, int *> ints{{"M_x", &c.M_x}, {"M_z", &c.M_z}, {"N_x", &c.N_x}, {"N_z", &c.N_z}};
        std::map<std::string, double *> reals{
            {"d_b", &c.d_b},         {"d_r", &c.d_r},         {"h_b", &c.h_b},         {"h_r", &c.h_r},
            {"h_u", &c.h_u},         {"alpha_d", &c.alpha_d}, {"alpha_rb", &c.alpha_rb}, {"alpha_ur", &c.alpha_ur},
            {"f_c", &c.f_c},         {"phi_D", &c.phi_D},     {"theta_D", &c.theta_D}, {"phi_A", &c.phi_A},
            {"theta_A", &c.theta_A}};
        for (auto &[k, p] : ints)
            if (g.contains(k))
                *p = count(g[k], k, "geometry");
        for (auto &[k, p] : reals)
            if (g.contains(k))
                *p = num(g[k], k, "geometry");
        if (g.contains("path_loss_distance"))
        {
            const std::string m = g["path_loss_distance"].is_string() ? g["path_loss_distance"].get<std::string>() : "";
            if (m == "planar")
                c.path_loss_distance = DistanceMode::Planar;
            else if (m == "3d")
                c.path_loss_distance = DistanceMode::ThreeD;
            else
                throw usage_error("scenario: geometry.path_loss_distance must be \"planar\" or \"3d\"");
        }
    }

    if (doc.contains("layout"))
    {
        const json &l = doc["layout"];
        if (l.is_string())
        {
            const auto it = layouts().find(l.get<std::string>());
            if (it == layouts().end())
                throw usage_error("scenario: layout must be one of A, B, C, D or an object");
            c.d_x = it->second.d_x;
            c.d_y = it->second.d_y;
            c.d_rb = it->second.d_rb;
        }
        else
        {
            detail::reject_unknown(l, {"d_x", "d_y", "d_rb"}, "layout");
            if (l.contains("d_x"))
                c.d_x = num(l["d_x"], "d_x", "layout");
            if (l.contains("d_y"))
                c.d_y = num(l["d_y"], "d_y", "layout");
            if (l.contains("d_rb"))
                c.d_rb = num(l["d_rb"], "d_rb", "layout");
        }
    }

    if (doc.contains("spatial_model"))
    {
        const json &m = doc["spatial_model"];
        if (m.is_string() && m.get<std::string>() == "sinc")
            c.spatial = SpatialModel{SpatialKind::Sinc, 0.0};
        else if (m.is_object())
        {
            detail::reject_unknown(m, {"exponential"}, "spatial_model");
            if (!m.contains("exponential"))
                throw usage_error("scenario: spatial_model object needs \"exponential\"");
            c.spatial = SpatialModel{SpatialKind::Exponential, num(m["exponential"], "exponential", "spatial_model")};
        }
        else
            throw usage_error("scenario: spatial_model must be \"sinc\" or {\"exponential\": rho}");
    }

    if (doc.contains("ricean"))
    {
        const json &r = doc["ricean"];
        detail::reject_unknown(r, {"kappa", "eta"}, "ricean");
        if (r.contains("kappa") == r.contains("eta"))
            throw usage_error("scenario: ricean needs exactly one of kappa, eta");
        if (r.contains("kappa"))
            c.kappa_rb = detail::number_or_inf(r["kappa"], "ricean.kappa");
        else
        {
            const double eta = num(r["eta"], "eta", "ricean");
            if (!(eta > 0.0 && eta <= 1.0))
                throw usage_error("scenario: ricean.eta must lie in (0, 1]");
            c.kappa_rb = (eta == 1.0) ? std::numeric_limits<double>::infinity() : eta * eta / (1.0 - eta * eta);
        }
    }

    if (doc.contains("doppler"))
    {
        const json &d = doc["doppler"];
        detail::reject_unknown(d, {"f_d", "f_ur"}, "doppler");
        if (d.contains("f_d"))
            c.f_d = num(d["f_d"], "f_d", "doppler");
        if (d.contains("f_ur"))
            c.f_ur = num(d["f_ur"], "f_ur", "doppler");
    }

    if (doc.contains("tx_snr_db") && doc.contains("tx_snr"))
        throw usage_error("scenario: give tx_snr_db or tx_snr, not both");
    if (doc.contains("tx_snr_db"))
        c.tx_snr = std::pow(10.0, num(doc["tx_snr_db"], "tx_snr_db", "scenario") / 10.0);
    if (doc.contains("tx_snr"))
        c.tx_snr = num(doc["tx_snr"], "tx_snr", "scenario");

    if (doc.contains("link_scale"))
    {
        const json &l = doc["link_scale"];
        detail::reject_unknown(l, {"direct", "ris"}, "link_scale");
        if (l.contains("direct"))
            c.direct_gain_scale = num(l["direct"], "direct", "link_scale");
        if (l.contains("ris"))
            c.ris_gain_scale = num(l["ris"], "ris", "link_scale");
    }

    if (doc.contains("mc"))
    {
        const json &m = doc["mc"];
        detail::reject_unknown(m, {"replicates", "seed", "sample_rate", "duration", "sos_count"}, "mc");
        if (m.contains("replicates"))
        {
            if (!m["replicates"].is_number_integer())
                throw usage_error("scenario: mc.replicates must be an integer");
            s.mc.replicates = m["replicates"].get<long>();
        }
        if (m.contains("seed"))
        {
            if (!m["seed"].is_number_unsigned())
                throw usage_error("scenario: mc.seed must be a nonnegative integer");
            s.mc.seed = m["seed"].get<std::uint64_t>();
        }
        if (m.contains("sample_rate"))
            s.mc.sample_rate = count(m["sample_rate"], "sample_rate", "mc");
        if (m.contains("duration"))
            s.mc.duration = num(m["duration"], "duration", "mc");
        if (m.contains("sos_count"))
            s.mc.sos_count = count(m["sos_count"], "sos_count", "mc");
    }

    if (doc.contains("grid"))
    {
        const json &g = doc["grid"];
        detail::reject_unknown(g, {"thresholds_db", "taus_norm", "rho"}, "grid");
        if (g.size() != 1)
            throw usage_error("scenario: grid needs exactly one of thresholds_db, taus_norm, rho");
        const std::string key = g.begin().key();
        const json &v = g.begin().value();
        if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number())
            throw usage_error("scenario: grid." + key + " must be [lo, hi, step]");
        s.grid.axis = key == "thresholds_db" ? GridSpec::Axis::ThresholdsDb
                      : key == "taus_norm"   ? GridSpec::Axis::TausNorm
                                             : GridSpec::Axis::Rho;
        s.grid.lo = v[0].get<double>();
        s.grid.hi = v[1].get<double>();
        s.grid.step = v[2].get<double>();
        check_grid(s.grid);
    }

    try
    {
        c.validate();
        s.mc.validate();
    }
    catch (const domain_error &e)
    {
        throw usage_error(std::string("scenario: ") + e.what());
    }
    return s;
}

inline Scenario load_scenario(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw usage_error("cannot open scenario file " + path);
    json doc;
    try
    {
        doc = json::parse(in);
    }
    catch (const json::parse_error &e)
    {
        throw usage_error("scenario file " + path + ": " + e.what());
    }
    return scenario_from_json(doc);
}

// Fully explicit form; scenario_from_json(scenario_to_json(s)) == s.
inline json scenario_to_json(const Scenario &s)
{
    const ScenarioConfig &c = s.cfg;
    json j;
    j["geometry"] = {{"M_x", c.M_x},
                     {"M_z", c.M_z},
                     {"N_x", c.N_x},
                     {"N_z", c.N_z},
                     {"d_b", c.d_b},
                     {"d_r", c.d_r},
                     {"h_b", c.h_b},
                     {"h_r", c.h_r},
                     {"h_u", c.h_u},
                     {"alpha_d", c.alpha_d},
                     {"alpha_rb", c.alpha_rb},
                     {"alpha_ur", c.alpha_ur},
                     {"f_c", c.f_c},
                     {"phi_D", c.phi_D},
                     {"theta_D", c.theta_D},
                     {"phi_A", c.phi_A},
                     {"theta_A", c.theta_A},
                     {"path_loss_distance", c.path_loss_distance == DistanceMode::Planar ? "planar" : "3d"}};
    j["layout"] = {{"d_x", c.d_x}, {"d_y", c.d_y}, {"d_rb", c.d_rb}};
    if (c.spatial.kind == SpatialKind::Sinc)
        j["spatial_model"] = "sinc";
    else
        j["spatial_model"] = {{"exponential", c.spatial.rho}};
    if (c.los_only())
        j["ricean"] = {{"kappa", "inf"}};
    else
        j["ricean"] = {{"kappa", c.kappa_rb}};
    j["doppler"] = {{"f_d", c.f_d}, {"f_ur", c.f_ur}};
    j["tx_snr"] = c.tx_snr;
    j["link_scale"] = {{"direct", c.direct_gain_scale}, {"ris", c.ris_gain_scale}};
    j["mc"] = {{"replicates", s.mc.replicates},
               {"seed", s.mc.seed},
               {"sample_rate", s.mc.sample_rate},
               {"duration", s.mc.duration},
               {"sos_count", s.mc.sos_count}};
    if (s.grid.axis != GridSpec::Axis::None)
        j["grid"] = {{axis_key(s.grid.axis), {s.grid.lo, s.grid.hi, s.grid.step}}};
    return j;
}

inline bool same_scenario(const Scenario &a, const Scenario &b)
{
    return a.cfg == b.cfg && a.mc.replicates == b.mc.replicates && a.mc.seed == b.mc.seed &&
           a.mc.sample_rate == b.mc.sample_rate && a.mc.duration == b.mc.duration &&
           a.mc.sos_count == b.mc.sos_count && a.grid == b.grid;
}

// FNV-1a over the canonical dump
inline std::string config_hash(const Scenario &s)
{
    const std::string text = scenario_to_json(s).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text)
    {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

} // namespace ris_sostat::io
