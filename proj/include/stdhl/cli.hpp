#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "stdhl/model.hpp"
#include "stdhl/training.hpp"

namespace stdhl {

struct DataConfig {
    std::string csv;
    std::string power_curve;  // empty: built-in GE 1.5 MW table
    bool power_only = false;
    std::int64_t stride = 1;
    std::vector<double> splits{0.7, 0.1, 0.2};
    std::string normalize = "per-farm-minmax";  // or "none"

    nlohmann::json to_json() const;
    static DataConfig from_json(const nlohmann::json& j);
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    DataConfig data;
    std::string output_dir = ".";

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);  // unknown keys rejected
    // Reads the file and applies the STDHL_SEED env override to both seeds.
    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;
};

// Exit codes: 0 ok, 1 usage error, 2 data error, 3 numerical failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace stdhl
