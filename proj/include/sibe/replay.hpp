#pragma once

#include <cstdint>
#include <vector>

#include "sibe/chunk.hpp"
#include "sibe/rng.hpp"

namespace sibe {

// One stored step. Intrinsic rewards are never stored: they are
// relabeled from the current model at every gradient step.
struct Transition {
    std::vector<double> obs;
    std::vector<double> action;
    double reward = 0.0;  // environment reward
    std::vector<double> next_obs;
    bool terminal = false;
    bool truncated = false;
    std::int64_t episode_id = 0;
    std::int64_t step_index = 0;  // within the episode
};

// Fixed-capacity ring; oldest transitions are evicted first. Episodes
// are pushed in order by a single writer, so time-consecutive steps of
// one episode always occupy adjacent ring slots.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::int64_t capacity);

    void push(Transition t);

    std::int64_t size() const { return size_; }
    std::int64_t capacity() const { return capacity_; }
    const Transition& at(std::int64_t logical) const;  // 0 = oldest

    // B chunks of L consecutive same-episode transitions, sampled
    // uniformly over valid starts with replacement. A start is valid when
    // all L steps share an episode and only the last may end it.
    ChunkBatch sample_chunks(std::int64_t num_chunks, std::int64_t chunk_len, Rng& rng) const;

    bool has_valid_start(std::int64_t chunk_len) const;
    std::int64_t count_valid_starts(std::int64_t chunk_len) const;
    bool is_valid_start_slot(std::int64_t slot, std::int64_t chunk_len) const;

private:
    std::int64_t capacity_;
    std::int64_t size_ = 0;
    std::int64_t head_ = 0;  // next write position
    std::int64_t obs_dim_ = 0;
    std::int64_t action_dim_ = 0;
    std::vector<Transition> ring_;
};

}  // namespace sibe
