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

#include "ris_sostat/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ris_sostat;
using json = io::json;

namespace
{
struct Result
{
    int code;
    std::string out, err;
};

Result invoke(std::vector<std::string> args)
{
    args.insert(args.begin(), "ris-sostat");
    std::vector<const char *> argv;
    for (const auto &a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string write_temp(const std::string &name, const std::string &text)
{
    const auto p = std::filesystem::temp_directory_path() / ("ris_sostat_test_" + name);
    std::ofstream(p) << text;
    return p.string();
}

io::Scenario parse(const std::string &text) { return io::scenario_from_json(json::parse(text)); }
} // namespace

TEST_CASE("scenario files", "[cli]")
{
    const io::Scenario d = parse("{}");
    CHECK(d.cfg == ScenarioConfig{});

    const io::Scenario s = parse(R"({"layout": "B", "ricean": {"eta": 0.99}, "tx_snr_db": 10,
        "spatial_model": {"exponential": 0.4}, "doppler": {"f_d": 5, "f_ur": 7},
        "geometry": {"M_x": 4, "M_z": 2, "path_loss_distance": "3d"},
        "mc": {"replicates": 500, "seed": 3}, "grid": {"taus_norm": [0, 1, 0.1]}})");
    CHECK(s.cfg.d_x == 20.0);
    CHECK(s.cfg.kappa_rb == Catch::Approx(0.99 * 0.99 / (1 - 0.99 * 0.99)));
    CHECK(s.cfg.tx_snr == Catch::Approx(10.0));
    CHECK(s.cfg.spatial.kind == SpatialKind::Exponential);
    CHECK(s.cfg.f_ur == 7.0);
    CHECK(s.cfg.M() == 8);
    CHECK(s.cfg.path_loss_distance == DistanceMode::ThreeD);
    CHECK(s.mc.replicates == 500);
    CHECK(s.grid.points().size() == 11);
    CHECK(std::isinf(parse(R"({"ricean": {"kappa": "inf"}})").cfg.kappa_rb));
    CHECK(parse(R"({"layout": {"d_x": 31}})").cfg.d_x == 31.0);

    for (const char *bad : {R"({"colour": 1})", R"({"geometry": {"M_y": 2}})", R"({"layout": "E"})",
                            R"({"ricean": {"kappa": 1, "eta": 0.5}})", R"({"ricean": {"eta": 1.5}})",
                            R"({"tx_snr": 1, "tx_snr_db": 0})", R"({"geometry": {"M_x": 0}})",
                            R"({"geometry": {"M_x": 2.5}})", R"({"grid": {"rho": [1, 0, 0.1]}})",
                            R"({"grid": {"rho": [0, 1]}})", R"({"mc": {"replicates": 0}})",
                            R"({"spatial_model": "gauss"})", R"({"doppler": {"f_d": -1}})"})
    {
        INFO(bad);
        CHECK_THROWS_AS(parse(bad), usage_error);
    }
    CHECK_THROWS_AS(io::load_scenario("/nonexistent/scenario.json"), usage_error);
}

TEST_CASE("scenario round trip and hash", "[cli]")
{
    const io::Scenario s = parse(R"({"layout": "C", "ricean": {"kappa": 2.5}, "tx_snr_db": 3,
        "spatial_model": {"exponential": 0.3}, "mc": {"seed": 17}})");
    const io::Scenario r = io::scenario_from_json(io::scenario_to_json(s));
    CHECK(io::same_scenario(s, r));
    CHECK(io::config_hash(s) == io::config_hash(r));
    CHECK(io::config_hash(s).size() == 16);
    io::Scenario t = s;
    t.mc.seed = 18;
    CHECK(io::config_hash(s) != io::config_hash(t));

    const std::string path = write_temp("rt.json", io::scenario_to_json(s).dump());
    for (const char *fmt : {"csv", "json"})
    {
        const Result a = invoke({"analytic", "--kind", "lcr-direct", "--scenario", path, "--grid", "-10:0:5", "--format",
                              fmt, "--deterministic"});
        REQUIRE(a.code == 0);
        io::Scenario back = cli::scenario_from_output(a.out);
        CHECK(back.cfg == s.cfg);
        CHECK(back.mc.seed == 17);
        CHECK(back.grid.step == 5.0);
    }
}

TEST_CASE("output tables", "[cli]")
{
    const Result a = invoke({"analytic", "--kind", "ageing", "--grid", "0:0.5:0.1", "--format", "json", "--deterministic"});
    REQUIRE(a.code == 0);
    const json doc = json::parse(a.out);
    CHECK(doc["records"].size() == 6);
    CHECK(doc["header"]["kind"] == "ageing");
    CHECK_FALSE(doc["header"].contains("timestamp"));
    CHECK(doc["records"][0]["f_tau"] == 0.0);

    CHECK(invoke({"analytic", "--kind", "lcr-ris", "--grid", "-6:0:2"}).code == cli::exit_usage); // needs LoS
    const std::string los = write_temp("los.json", R"({"ricean": {"kappa": "inf"}})");
    const Result c = invoke({"analytic", "--kind", "lcr-ris", "--scenario", los, "--grid", "-6:0:2"});
    REQUIRE(c.code == 0);
    std::istringstream in(c.out);
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# {", 0) == 0);
    CHECK(json::parse(line.substr(2)).contains("timestamp"));
    std::getline(in, line);
    CHECK(line.rfind("snr_db_rel_mean,threshold,analytic", 0) == 0);
    int rows = 0;
    while (std::getline(in, line))
        ++rows;
    CHECK(rows == 4);

    CHECK(cli::format_cell(std::nan("")) == "");
    CHECK(cli::format_cell(INFINITY) == "inf");
    CHECK(cli::format_cell(0.1) == "0.1");
}

TEST_CASE("exit codes", "[cli]")
{
    CHECK(invoke({}).code == cli::exit_usage);
    CHECK(invoke({"frobnicate"}).code == cli::exit_usage);
    CHECK(invoke({"analytic", "--kind", "nope"}).code == cli::exit_usage);
    CHECK(invoke({"analytic"}).code == cli::exit_usage);
    CHECK(invoke({"analytic", "--kind", "ageing", "--format", "xml"}).code == cli::exit_usage);
    CHECK(invoke({"analytic", "--kind", "ageing", "--grid", "1:0:0.1"}).code == cli::exit_usage);
    CHECK(invoke({"analytic", "--kind", "chan-corr", "--grid", "0:2:0.5"}).code == cli::exit_usage);
    CHECK(invoke({"analytic", "--kind", "snr-corr"}).code == cli::exit_usage); // Ricean default, needs LoS
    const Result full = invoke({"compare", "--kind", "lcr", "--mode", "full"});
    CHECK(full.code == cli::exit_usage);
    CHECK(full.err.find("full mode") != std::string::npos);
    CHECK(invoke({"analytic", "--kind", "ageing", "--scenario", "/nonexistent.json"}).code == cli::exit_usage);
    CHECK(invoke({"--version"}).code == cli::exit_ok);

    const std::string small = write_temp("small.json", R"({"geometry": {"M_x": 4, "M_z": 2, "N_x": 8, "N_z": 4}})");
    const Result ok = invoke({"compare", "--kind", "ageing", "--scenario", small, "--grid", "0:0.2:0.1", "--replicates",
                           "4000", "--tolerance", "5"});
    CHECK(ok.code == cli::exit_ok);
    CHECK(ok.err.find("PASS") != std::string::npos);
    const Result tight = invoke({"compare", "--kind", "ageing", "--scenario", small, "--grid", "0.1:0.2:0.1",
                              "--replicates", "4000", "--tolerance", "0"});
    CHECK(tight.code == cli::exit_tolerance);
    CHECK(tight.err.find("FAIL") != std::string::npos);
}

TEST_CASE("deterministic output", "[cli]")
{
    const std::string small = write_temp("det.json", R"({"geometry": {"M_x": 4, "M_z": 2, "N_x": 8, "N_z": 4},
        "ricean": {"kappa": "inf"}, "mc": {"replicates": 2000, "seed": 5}})");
    const std::vector<std::string> args{"simulate", "--kind", "snr-corr", "--scenario", small,
                                        "--grid", "0:0.3:0.1", "--deterministic"};
    const Result a = invoke(args), b = invoke(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    std::vector<std::string> other = args;
    other.insert(other.end(), {"--seed", "6"});
    CHECK(invoke(other).out != a.out);

    const auto path = std::filesystem::temp_directory_path() / "ris_sostat_test_out.csv";
    std::vector<std::string> to_file = args;
    to_file.insert(to_file.end(), {"--out", path.string()});
    REQUIRE(invoke(to_file).code == 0);
    std::ifstream in(path, std::ios::binary);
    CHECK(std::string(std::istreambuf_iterator<char>(in), {}) == a.out);
}

TEST_CASE("Monte Carlo budget guard", "[cli]")
{
    const Result r = invoke({"simulate", "--kind", "lcr-direct", "--replicates", "100000000"});
    CHECK(r.code == cli::exit_usage);
    CHECK(r.err.find("--replicates") != std::string::npos);
    const Result m = invoke({"simulate", "--kind", "chan-corr", "--grid", "0:0:1", "--replicates", "1000000000",
                          "--max-work", "1e6"});
    CHECK(m.code == cli::exit_usage);
}

TEST_CASE("shadowing the dominant link", "[cli]")
{
    ScenarioConfig c;
    const ScenarioConfig before = c;
    const std::string which = cli::shadow_dominant(c, 0.5);
    CHECK((which == "direct" || which == "ris"));
    if (which == "direct")
        CHECK(c.direct_gain_scale == 0.5 * before.direct_gain_scale);
    else
        CHECK(c.ris_gain_scale == 0.5 * before.ris_gain_scale);
    CHECK_THROWS_AS(cli::shadow_dominant(c, 0.0), usage_error);
    const Result r = invoke({"analytic", "--kind", "ageing", "--shadow-dominant", "0.1", "--grid", "0:0.1:0.1",
                          "--format", "json"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["header"].contains("shadowed_link"));
}

TEST_CASE("selftest command", "[cli]")
{
    const Result r = invoke({"selftest"});
    CHECK(r.code == cli::exit_ok);
    CHECK(r.out.find("all checks passed") != std::string::npos);
    CHECK(r.out.find("FAIL") == std::string::npos);
}
