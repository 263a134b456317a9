#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sibe/tensor.hpp"

namespace sibe {

// Single-file checkpoint: one JSON header line holding format_version,
// dims/config metadata and the parameter manifest (name -> shape), then
// raw little-endian float64 arrays in manifest order. Round trips are
// bit-exact.
void save_checkpoint(const std::string& path, const nlohmann::ordered_json& meta,
                     const std::vector<std::pair<std::string, Tensor>>& params);

struct CheckpointData {
    nlohmann::ordered_json header;
    std::vector<std::pair<std::string, std::vector<double>>> params;  // manifest order

    const std::vector<double>& values(const std::string& name) const;
};

CheckpointData load_checkpoint(const std::string& path);

// Copies checkpoint values into live tensors by name; shapes must match.
void assign_parameters(const CheckpointData& ckpt,
                       const std::vector<std::pair<std::string, Tensor>>& params);

}  // namespace sibe
