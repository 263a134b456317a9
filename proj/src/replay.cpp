#include "sibe/replay.hpp"

#include "sibe/errors.hpp"

namespace sibe {

ReplayBuffer::ReplayBuffer(std::int64_t capacity) : capacity_(capacity) {
    if (capacity <= 0) throw ConfigError("replay capacity must be positive");
    ring_.resize(static_cast<std::size_t>(capacity));
}

void ReplayBuffer::push(Transition t) {
    if (size_ == 0) {
        obs_dim_ = static_cast<std::int64_t>(t.obs.size());
        action_dim_ = static_cast<std::int64_t>(t.action.size());
    } else if (static_cast<std::int64_t>(t.obs.size()) != obs_dim_ ||
               static_cast<std::int64_t>(t.next_obs.size()) != obs_dim_ ||
               static_cast<std::int64_t>(t.action.size()) != action_dim_) {
        throw ShapeError("replay push: transition dims changed mid-stream");
    }
    ring_[static_cast<std::size_t>(head_)] = std::move(t);
    head_ = (head_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
}

const Transition& ReplayBuffer::at(std::int64_t logical) const {
    if (logical < 0 || logical >= size_)
        throw ValueError("replay index " + std::to_string(logical) + " out of range");
    std::int64_t slot = (head_ - size_ + logical + capacity_) % capacity_;
    return ring_[static_cast<std::size_t>(slot)];
}

bool ReplayBuffer::is_valid_start_slot(std::int64_t slot, std::int64_t chunk_len) const {
    // Caller guarantees slot indexes a live entry.
    const Transition& first = ring_[static_cast<std::size_t>(slot)];
    for (std::int64_t k = 1; k < chunk_len; ++k) {
        // The window must stay inside live entries: with a full ring every
        // slot is live; otherwise slots [0, size_) are.
        std::int64_t next = (slot + k) % capacity_;
        if (size_ < capacity_ && next >= size_) return false;
        const Transition& prev = ring_[static_cast<std::size_t>((slot + k - 1) % capacity_)];
        const Transition& cur = ring_[static_cast<std::size_t>(next)];
        if (cur.episode_id != first.episode_id) return false;
        if (cur.step_index != prev.step_index + 1) return false;
        if (prev.terminal || prev.truncated) return false;  // done only at the last step
    }
    return true;
}

std::int64_t ReplayBuffer::count_valid_starts(std::int64_t chunk_len) const {
    std::int64_t n = 0;
    for (std::int64_t s = 0; s < size_; ++s)
        if (is_valid_start_slot(s, chunk_len)) ++n;
    return n;
}

bool ReplayBuffer::has_valid_start(std::int64_t chunk_len) const {
    if (chunk_len <= 0 || size_ < chunk_len) return false;
    for (std::int64_t s = 0; s < size_; ++s)
        if (is_valid_start_slot(s, chunk_len)) return true;
    return false;
}

ChunkBatch ReplayBuffer::sample_chunks(std::int64_t num_chunks, std::int64_t chunk_len,
                                       Rng& rng) const {
    if (num_chunks < 1) throw ValueError("sample_chunks: need at least one chunk");
    if (chunk_len < 1) throw ValueError("sample_chunks: chunk length must be positive");
    if (size_ < chunk_len)
        throw ValueError("sample_chunks: buffer holds " + std::to_string(size_) +
                         " transitions, chunk length is " + std::to_string(chunk_len));

    ChunkBatch batch;
    batch.num_chunks = num_chunks;
    batch.chunk_len = chunk_len;
    batch.obs_dim = obs_dim_;
    batch.action_dim = action_dim_;
    std::size_t samples = static_cast<std::size_t>(num_chunks * chunk_len);
    batch.obs.resize(samples * static_cast<std::size_t>(obs_dim_));
    batch.actions.resize(samples * static_cast<std::size_t>(action_dim_));
    batch.rewards.resize(samples);
    batch.next_obs.resize(samples * static_cast<std::size_t>(obs_dim_));
    batch.terminal.resize(samples);
    batch.truncated.resize(samples);
    batch.episode_ids.resize(samples);
    batch.step_indices.resize(samples);

    // Rejection sampling is exactly uniform over the valid-start set.
    const std::int64_t max_tries = 64 * (size_ + 16);
    for (std::int64_t b = 0; b < num_chunks; ++b) {
        std::int64_t start = -1;
        for (std::int64_t attempt = 0; attempt < max_tries; ++attempt) {
            std::int64_t slot = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(size_)));
            if (is_valid_start_slot(slot, chunk_len)) {
                start = slot;
                break;
            }
        }
        if (start < 0) {
            if (count_valid_starts(chunk_len) == 0)
                throw ValueError("sample_chunks: no valid chunk start of length " +
                                 std::to_string(chunk_len) + " in a buffer of " +
                                 std::to_string(size_) + " transitions");
            throw ValueError("sample_chunks: rejection sampling failed to find a start");
        }
        for (std::int64_t t = 0; t < chunk_len; ++t) {
            const Transition& tr = ring_[static_cast<std::size_t>((start + t) % capacity_)];
            std::size_t i = batch.flat(b, t);
            std::copy(tr.obs.begin(), tr.obs.end(),
                      batch.obs.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(obs_dim_)));
            std::copy(tr.action.begin(), tr.action.end(),
                      batch.actions.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(action_dim_)));
            std::copy(tr.next_obs.begin(), tr.next_obs.end(),
                      batch.next_obs.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(obs_dim_)));
            batch.rewards[i] = tr.reward;
            batch.terminal[i] = tr.terminal ? 1 : 0;
            batch.truncated[i] = tr.truncated ? 1 : 0;
            batch.episode_ids[i] = tr.episode_id;
            batch.step_indices[i] = tr.step_index;
        }
    }
    return batch;
}

}  // namespace sibe
