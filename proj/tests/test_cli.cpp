#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdhl/cli.hpp"
#include "stdhl/data.hpp"

using namespace stdhl;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Workspace {
    fs::path dir;
    std::string data_csv;
    std::string config_path;

    explicit Workspace(const std::string& tag) {
        dir = fs::temp_directory_path() / ("stdhl_cli_" + tag);
        fs::remove_all(dir);
        fs::create_directories(dir);
        data_csv = (dir / "data.csv").string();
        config_path = (dir / "config.json").string();
        REQUIRE(run_cli({"synth", "--farms", "3", "--length", "220", "--seed", "5", "--out",
                         data_csv}) == 0);
        RunConfig cfg;
        cfg.model.n_nodes = 3;
        cfg.model.hidden = 8;
        cfg.model.adjust_width = 8;
        cfg.model.n_blocks = 1;
        cfg.model.embed_dim = 4;
        cfg.model.linear_hidden = 32;
        cfg.model.quantile_levels = {0.1, 0.5, 0.9};
        cfg.train.max_epochs = 2;
        cfg.train.patience = 2;
        cfg.train.batch_size = 16;
        cfg.data.csv = data_csv;
        cfg.output_dir = (dir / "out").string();
        cfg.save(config_path);
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("config init: defaults parse back; unknown keys rejected") {
    Workspace ws("config");
    const auto p = ws.path("defaults.json");
    CHECK(run_cli({"config", "init", "--out", p}) == 0);
    auto cfg = RunConfig::load(p);
    CHECK(cfg.model.n_nodes == 10);
    CHECK(cfg.model.look_back == 12);
    CHECK(cfg.model.horizon == 4);
    CHECK(cfg.model.nwp_extension == 4);
    CHECK(cfg.model.quantile_levels.size() == 19);
    CHECK(cfg.train.learning_rate == 1e-3);
    CHECK(cfg.train.batch_size == 64);
    CHECK(cfg.train.max_epochs == 100);
    CHECK(cfg.train.patience == 10);
    CHECK(cfg.train.clip_norm == 5.0);

    nlohmann::json j = nlohmann::json::parse(read_file(p));
    j["model"]["typo_key"] = 1;
    std::ofstream(ws.path("bad.json")) << j.dump();
    CHECK_THROWS_AS(RunConfig::load(ws.path("bad.json")), std::invalid_argument);
}

TEST_CASE("synth: identical seeds give byte-identical files") {
    Workspace ws("synthdet");
    const auto a = ws.path("a.csv"), b = ws.path("b.csv"), c = ws.path("c.csv");
    CHECK(run_cli({"synth", "--farms", "2", "--length", "60", "--seed", "9", "--out", a}) == 0);
    CHECK(run_cli({"synth", "--farms", "2", "--length", "60", "--seed", "9", "--out", b}) == 0);
    CHECK(run_cli({"synth", "--farms", "2", "--length", "60", "--seed", "10", "--out", c}) == 0);
    CHECK(read_file(a) == read_file(b));
    CHECK(read_file(a) != read_file(c));
}

TEST_CASE("train: every trainable model runs and writes a checkpoint + history") {
    Workspace ws("trainall");
    for (const std::string name : {"stdhl", "stsgl", "stdgl", "stshl", "linear"}) {
        CAPTURE(name);
        CHECK(run_cli({"train", "--config", ws.config_path, "--model", name}) == 0);
        CHECK(fs::exists(ws.path("out/" + name + ".ckpt")));
        const auto hist = read_file(ws.path("out/" + name + "_history.csv"));
        CHECK(hist.rfind("epoch,train_loss,val_pinball", 0) == 0);
    }
}

TEST_CASE("train: unknown model name lists the valid ones (exit 1)") {
    Workspace ws("badmodel");
    CHECK(run_cli({"train", "--config", ws.config_path, "--model", "prophet"}) == 1);
}

TEST_CASE("train: deterministic per seed, and STDHL_SEED overrides the config") {
    Workspace ws("traindet");
    CHECK(run_cli({"train", "--config", ws.config_path, "--model", "linear", "--out",
                   ws.path("r1")}) == 0);
    CHECK(run_cli({"train", "--config", ws.config_path, "--model", "linear", "--out",
                   ws.path("r2")}) == 0);
    CHECK(read_file(ws.path("r1/linear_history.csv")) ==
          read_file(ws.path("r2/linear_history.csv")));

    setenv("STDHL_SEED", "777", 1);
    CHECK(run_cli({"train", "--config", ws.config_path, "--model", "linear", "--out",
                   ws.path("r3")}) == 0);
    unsetenv("STDHL_SEED");
    CHECK(read_file(ws.path("r1/linear_history.csv")) !=
          read_file(ws.path("r3/linear_history.csv")));
}

TEST_CASE("evaluate: trained checkpoint and built-in baselines; Table-style columns") {
    Workspace ws("eval");
    REQUIRE(run_cli({"train", "--config", ws.config_path, "--model", "stdhl"}) == 0);
    CHECK(run_cli({"evaluate", "--checkpoint", ws.path("out/stdhl.ckpt"), "--data", ws.data_csv,
                   "--out", ws.path("ev"), "--split", "test"}) == 0);
    const auto csv = read_file(ws.path("ev/report.csv"));
    CHECK(csv.rfind("MAE,RMSE,AR,PP,CRPS,PS", 0) == 0);
    CHECK(fs::exists(ws.path("ev/per_horizon_mae.csv")));
    CHECK(fs::exists(ws.path("ev/report.json")));

    for (const std::string base : {"persistence", "mechanism"}) {
        CAPTURE(base);
        CHECK(run_cli({"evaluate", "--checkpoint", base, "--data", ws.data_csv, "--config",
                       ws.config_path, "--out", ws.path("ev_" + base)}) == 0);
        CHECK(fs::exists(ws.path("ev_" + base + "/report.csv")));
    }
    // baselines without a config are a usage error
    CHECK(run_cli({"evaluate", "--checkpoint", "persistence", "--data", ws.data_csv, "--out",
                   ws.path("evx")}) == 1);
    // missing data file is a data error
    CHECK(run_cli({"evaluate", "--checkpoint", ws.path("out/stdhl.ckpt"), "--data",
                   ws.path("nothere.csv"), "--out", ws.path("evy")}) == 2);
}

TEST_CASE("forecast: fan rows are monotone in the level at every (farm, time)") {
    Workspace ws("fan");
    REQUIRE(run_cli({"train", "--config", ws.config_path, "--model", "stdhl"}) == 0);
    const auto fan = ws.path("fan.csv");
    CHECK(run_cli({"forecast", "--checkpoint", ws.path("out/stdhl.ckpt"), "--data", ws.data_csv,
                   "--origin", "0", "--out", fan}) == 0);
    std::ifstream in(fan);
    std::string line;
    std::getline(in, line);
    CHECK(line == "time,farm,level,value");
    std::map<std::string, std::pair<double, double>> last;  // (farm|time) -> (level, value)
    int rows = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string time, farm, level, value;
        std::getline(ss, time, ',');
        std::getline(ss, farm, ',');
        std::getline(ss, level, ',');
        std::getline(ss, value, ',');
        const auto key = time + "|" + farm;
        const double lv = std::stod(level), vv = std::stod(value);
        auto it = last.find(key);
        if (it != last.end()) {
            CHECK(lv > it->second.first);
            CHECK(vv >= it->second.second);
        }
        last[key] = {lv, vv};
        ++rows;
    }
    CHECK(rows == 4 * 3 * 3);  // horizon x farms x levels

    // origin by timestamp equals origin by index
    const auto fan2 = ws.path("fan2.csv");
    auto series = load_csv(ws.data_csv).series;
    WindowOptions wopt;  // defaults match the config (12/4/4)
    const auto origin_ts = format_timestamp(make_windows(series, wopt).samples[0].origin_time);
    CHECK(run_cli({"forecast", "--checkpoint", ws.path("out/stdhl.ckpt"), "--data", ws.data_csv,
                   "--origin", origin_ts, "--out", fan2}) == 0);
    CHECK(read_file(fan) == read_file(fan2));
}

TEST_CASE("transfer-matrix: stochastic rows for stdhl, symmetry for stsgl, reject linear") {
    Workspace ws("tm");
    for (const std::string name : {"stdhl", "stsgl", "linear"}) {
        REQUIRE(run_cli({"train", "--config", ws.config_path, "--model", name}) == 0);
    }
    auto read_matrix = [&](const std::string& path, std::vector<std::vector<double>>& m) {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string cell;
            std::getline(ss, cell, ',');  // row label
            std::vector<double> row;
            while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
            m.push_back(row);
        }
    };

    const auto p1 = ws.path("tm_stdhl.csv");
    CHECK(run_cli({"transfer-matrix", "--checkpoint", ws.path("out/stdhl.ckpt"), "--data",
                   ws.data_csv, "--out", p1}) == 0);
    std::vector<std::vector<double>> m1;
    read_matrix(p1, m1);
    REQUIRE(m1.size() == 3);
    double asym = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            s += m1[i][j];
            asym = std::max(asym, std::abs(m1[i][j] - m1[j][i]));
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(asym > 0.0);

    const auto p2 = ws.path("tm_stsgl.csv");
    CHECK(run_cli({"transfer-matrix", "--checkpoint", ws.path("out/stsgl.ckpt"), "--data",
                   ws.data_csv, "--out", p2}) == 0);
    std::vector<std::vector<double>> m2;
    read_matrix(p2, m2);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::abs(m2[i][j] - m2[j][i]) <= 1e-8);

    CHECK(run_cli({"transfer-matrix", "--checkpoint", ws.path("out/linear.ckpt"), "--data",
                   ws.data_csv, "--out", ws.path("tm_linear.csv")}) == 1);
}

TEST_CASE("ablate lookback: one MAE per value; bad values are usage errors") {
    Workspace ws("ablate");
    const auto out = ws.path("lookback.csv");
    CHECK(run_cli({"ablate", "lookback", "--values", "4,8", "--config", ws.config_path, "--out",
                   out}) == 0);
    std::ifstream in(out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "lookback,test_mae");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);

    CHECK(run_cli({"ablate", "lookback", "--values", "4,-2", "--config", ws.config_path, "--out",
                   out}) == 1);
    CHECK(run_cli({"ablate", "nwp-ext", "--values", "0,1", "--config", ws.config_path, "--out",
                   ws.path("ext.csv")}) == 0);
}

TEST_CASE("ablate lookback: planted long-range memory favors the longer window") {
    // Farms 2 and 3 repeat farm 1 with an 8-9 hour delay and the pseudo-NWP
    // is 6 hours stale, so the leader's signal is only reachable through a
    // long measured window.
    const auto dir = fs::temp_directory_path() / "stdhl_cli_planted";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto data = (dir / "data.csv").string();
    REQUIRE(run_cli({"synth", "--farms", "3", "--length", "2500", "--seed", "12", "--lags",
                     "0,8,9", "--nwp-lag", "6", "--nwp-bias", "0.5", "--noise", "0.02", "--out",
                     data}) == 0);
    RunConfig cfg;  // default model widths
    cfg.model.n_nodes = 3;
    cfg.model.horizon = 2;
    cfg.model.nwp_extension = 1;
    cfg.model.quantile_levels = {0.1, 0.5, 0.9};
    cfg.model.seed = 2;
    cfg.train.max_epochs = 12;
    cfg.train.patience = 12;
    cfg.train.seed = 2;
    cfg.data.csv = data;
    const auto cfg_path = (dir / "config.json").string();
    cfg.save(cfg_path);
    const auto out = (dir / "lookback.csv").string();
    REQUIRE(run_cli({"ablate", "lookback", "--values", "3,12", "--config", cfg_path, "--out",
                     out}) == 0);
    std::ifstream in(out);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "lookback,test_mae");
    double mae3 = -1.0, mae12 = -1.0;
    while (std::getline(in, line)) {
        if (line.rfind("3,", 0) == 0) mae3 = std::stod(line.substr(2));
        if (line.rfind("12,", 0) == 0) mae12 = std::stod(line.substr(3));
    }
    REQUIRE(mae3 > 0.0);
    REQUIRE(mae12 > 0.0);
    CHECK(mae12 <= mae3);
}

TEST_CASE("ablate spatial: incremental farm sets around the target") {
    Workspace ws("spatial");
    const auto out = ws.path("spatial.csv");
    CHECK(run_cli({"ablate", "spatial", "--target", "2", "--order", "1,3", "--config",
                   ws.config_path, "--model", "linear", "--out", out}) == 0);
    std::ifstream in(out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "n_farms,farms,target_mae");
    std::vector<std::string> rows;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].rfind("1,2,", 0) == 0);
    CHECK(rows[1].rfind("2,2+1,", 0) == 0);
    CHECK(rows[2].rfind("3,2+1+3,", 0) == 0);
}
