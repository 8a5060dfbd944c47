#include "stdhl/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace stdhl {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'D', 'H', 'L', 'C', 'P', '1'};

void write_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

nlohmann::json tensor_manifest(const std::vector<Tensor>& ts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : ts) arr.push_back(t.shape());
    return arr;
}

void write_tensors(std::ofstream& out, const std::vector<Tensor>& ts) {
    for (const auto& t : ts)
        out.write(reinterpret_cast<const char*>(t.data().data()),
                  static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

void read_tensors(std::ifstream& in, std::vector<Tensor>& ts, const nlohmann::json& manifest,
                  const std::string& path, const char* what) {
    if (manifest.size() != ts.size())
        throw DataError("checkpoint " + path + ": " + what + " count " +
                        std::to_string(manifest.size()) + " does not match model (" +
                        std::to_string(ts.size()) + ")");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto shape = manifest[i].get<Shape>();
        if (shape != ts[i].shape())
            throw DataError("checkpoint " + path + ": " + what + " " + std::to_string(i) +
                            " shape " + shape_str(shape) + " does not match model " +
                            shape_str(ts[i].shape()));
        in.read(reinterpret_cast<char*>(ts[i].data().data()),
                static_cast<std::streamsize>(ts[i].numel() * sizeof(double)));
        if (!in) throw DataError("checkpoint " + path + ": truncated tensor data");
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const Forecaster& model,
                     const FeatureScaler& scaler) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path);

    const auto params = model.parameters();
    const auto buffers = model.buffers();
    nlohmann::json header;
    header["kind"] = model.kind();
    header["config"] = model.config().to_json();
    header["scaler"] = scaler.to_json();
    header["params"] = tensor_manifest(params);
    header["buffers"] = tensor_manifest(buffers);
    const std::string hs = header.dump();

    out.write(kMagic, sizeof kMagic);
    write_u64(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    write_tensors(out, params);
    write_tensors(out, buffers);
    if (!out) throw DataError("failed while writing checkpoint " + path);
}

LoadedModel load_checkpoint(const std::string& path, const PowerCurve* curve) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("checkpoint " + path + ": bad magic (not a checkpoint file)");
    const auto len = read_u64(in);
    std::string hs(len, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("checkpoint " + path + ": truncated header");
    nlohmann::json header = nlohmann::json::parse(hs);

    const auto kind = header.at("kind").get<std::string>();
    ModelConfig cfg = ModelConfig::from_json(header.at("config"));
    LoadedModel lm;
    lm.scaler = FeatureScaler::from_json(header.at("scaler"));
    lm.model = make_forecaster(kind, cfg, std::nullopt, curve);

    auto params = lm.model->parameters();
    auto buffers = lm.model->buffers();
    read_tensors(in, params, header.at("params"), path, "parameter");
    read_tensors(in, buffers, header.at("buffers"), path, "buffer");
    return lm;
}

}  // namespace stdhl
