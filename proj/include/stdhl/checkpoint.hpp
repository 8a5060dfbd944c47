#pragma once

#include <memory>
#include <string>

#include "stdhl/data.hpp"
#include "stdhl/model.hpp"

namespace stdhl {

// Single-file container: magic, length-prefixed JSON header (kind, config,
// scaler, tensor manifest), then raw little-endian doubles for parameters and
// buffers. Round trips are bit-exact.
void save_checkpoint(const std::string& path, const Forecaster& model,
                     const FeatureScaler& scaler);

struct LoadedModel {
    std::unique_ptr<Forecaster> model;
    FeatureScaler scaler;
};

LoadedModel load_checkpoint(const std::string& path, const PowerCurve* curve = nullptr);

}  // namespace stdhl
