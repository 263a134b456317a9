#pragma once

#include <cstdint>
#include <vector>

namespace sibe {

// B sequence chunks of L consecutive transitions from single episodes.
// Feature arrays are row-major [chunk][step][feature]. The sampler
// guarantees that within a chunk, next_obs of step t equals obs of
// step t+1 and episode ids match.
struct ChunkBatch {
    std::int64_t num_chunks = 0;  // B
    std::int64_t chunk_len = 0;   // L
    std::int64_t obs_dim = 0;
    std::int64_t action_dim = 0;

    std::vector<double> obs;
    std::vector<double> actions;
    std::vector<double> rewards;   // environment rewards only
    std::vector<double> next_obs;
    std::vector<std::uint8_t> terminal;   // true termination (bootstrap stops)
    std::vector<std::uint8_t> truncated;  // time-limit cut (bootstrap continues)
    std::vector<std::int64_t> episode_ids;
    std::vector<std::int64_t> step_indices;

    std::int64_t samples() const { return num_chunks * chunk_len; }
    std::size_t flat(std::int64_t chunk, std::int64_t step) const {
        return static_cast<std::size_t>(chunk * chunk_len + step);
    }
};

}  // namespace sibe
