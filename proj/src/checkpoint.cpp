#include "sibe/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "sibe/errors.hpp"

namespace sibe {

namespace {

constexpr int kFormatVersion = 1;

void write_f64_le(std::ofstream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(bytes, 8);
}

double read_f64_le(std::ifstream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw ValueError("checkpoint: truncated parameter data");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::string& path, const nlohmann::ordered_json& meta,
                     const std::vector<std::pair<std::string, Tensor>>& params) {
    nlohmann::ordered_json header;
    header["format_version"] = kFormatVersion;
    for (auto it = meta.begin(); it != meta.end(); ++it) header[it.key()] = it.value();
    nlohmann::ordered_json manifest = nlohmann::ordered_json::object();
    for (const auto& [name, t] : params) {
        if (manifest.contains(name)) throw ValueError("checkpoint: duplicate parameter '" + name + "'");
        manifest[name] = t.shape();
    }
    header["manifest"] = manifest;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open checkpoint file '" + path + "' for writing");
    out << header.dump() << "\n";
    for (const auto& [name, t] : params)
        for (double v : t.value()) write_f64_le(out, v);
    if (!out) throw ValueError("checkpoint: write failed for '" + path + "'");
}

const std::vector<double>& CheckpointData::values(const std::string& name) const {
    for (const auto& [n, v] : params)
        if (n == name) return v;
    throw ValueError("checkpoint: no parameter named '" + name + "'");
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint file '" + path + "'");
    std::string header_line;
    if (!std::getline(in, header_line)) throw ValueError("checkpoint: missing header");

    CheckpointData data;
    data.header = nlohmann::ordered_json::parse(header_line);
    if (!data.header.contains("format_version") ||
        data.header["format_version"].get<int>() != kFormatVersion)
        throw ValueError("checkpoint: unsupported format version");
    const auto& manifest = data.header.at("manifest");
    for (auto it = manifest.begin(); it != manifest.end(); ++it) {
        Shape shape = it.value().get<Shape>();
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        std::vector<double> vals(static_cast<std::size_t>(n));
        for (auto& v : vals) v = read_f64_le(in);
        data.params.emplace_back(it.key(), std::move(vals));
    }
    return data;
}

void assign_parameters(const CheckpointData& ckpt,
                       const std::vector<std::pair<std::string, Tensor>>& params) {
    for (const auto& [name, t] : params) {
        const auto& src = ckpt.values(name);
        Tensor dst = t;
        if (src.size() != static_cast<std::size_t>(dst.numel()))
            throw ShapeError("checkpoint: size mismatch for '" + name + "'");
        auto out = dst.value_mut();
        std::copy(src.begin(), src.end(), out.begin());
    }
}

}  // namespace sibe
