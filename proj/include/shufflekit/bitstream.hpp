/*
 * Copyright 2026 The shufflekit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SHUFFLEKIT_BITSTREAM_HPP
#define SHUFFLEKIT_BITSTREAM_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace shufflekit {

/// SplitMix64 finalizer. Also used to derive substream seeds.
constexpr uint64_t mix64(uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of the substream with the given index of a stream seeded with `seed`.
constexpr uint64_t derive_seed(uint64_t seed, uint64_t index) noexcept {
    return mix64(mix64(seed ^ 0x6a09e667f3bcc909ULL) + (index + 1) * 0x9e3779b97f4a7c15ULL);
}

/// A recorded sequence of random bits. The text form is one '0'/'1'
/// character per bit followed by a newline.
struct DrawTape {
    std::vector<uint8_t> bits;

    static DrawTape parse(std::string_view text);
    std::string to_string() const;

    bool operator==(const DrawTape &) const = default;
};

DrawTape read_tape_file(const std::filesystem::path &path);
void write_tape_file(const std::filesystem::path &path, const DrawTape &tape);

/// Thrown when a replayed tape has no more bits and no fallback generator.
class TapeExhausted : public std::runtime_error {
public:
    TapeExhausted() : std::runtime_error("draw tape exhausted") {}
};

/// External supplier of bits, keyed by stream. Used for tape replay and for
/// the exhaustive execution-tree enumeration. Must be safe to call from
/// several threads when driving parallel algorithms.
class BitProvider {
public:
    virtual ~BitProvider() = default;

    /// Next bit (0 or 1) for the stream, or -1 when the provider has run dry.
    virtual int next_bit(uint64_t stream_key) = 0;

    /// Up to `count` (at most 64) bits packed MSB-first into `out`; returns
    /// how many were delivered, fewer only when the provider ran dry.
    virtual unsigned next_bits(uint64_t stream_key, unsigned count, uint64_t &out) {
        out = 0;
        for (unsigned i = 0; i < count; ++i) {
            int b = next_bit(stream_key);
            if (b < 0) return i;
            out = (out << 1) | static_cast<uint64_t>(b);
        }
        return count;
    }
};

/// Stream of unbiased random bits with exact consumption accounting.
///
/// Bits are taken most-significant-first from 64-bit SplitMix64 outputs;
/// the unused remainder of a word is buffered for the next request, so
/// bits_consumed() counts exactly the bits handed out. A source is
/// single-owner; parallel code obtains one substream per task.
class BitSource {
public:
    explicit BitSource(uint64_t seed = 0) noexcept;

    /// Replays `tape` and throws TapeExhausted past its end. Substreams of
    /// a replaying source read from the same tape, in call order.
    static BitSource from_tape(DrawTape tape);
    /// Replays `tape`, then continues with a generator seeded by `fallback_seed`.
    static BitSource from_tape(DrawTape tape, uint64_t fallback_seed);
    static BitSource from_provider(std::shared_ptr<BitProvider> provider, uint64_t stream_key);

    unsigned flip() {
        if (hooked_) return flip_hooked();
        if (avail_ == 0) refill();
        unsigned bit = static_cast<unsigned>(word_ >> 63);
        word_ <<= 1;
        --avail_;
        ++consumed_;
        return bit;
    }

    /// `count` bits (at most 64) packed MSB-first, i.e. the value of the
    /// next `count` flips read as a binary number.
    uint64_t take_bits(unsigned count);

    /// Uniform integer in [0, bound) by the Fast Dice Roller. Consumes no
    /// bits when bound is 1. Requires 1 <= bound <= 2^63.
    uint64_t random_int(uint64_t bound);

    /// Independent child stream, deterministic in (seed(), index). The
    /// child's counter starts at zero and is separate from the parent's.
    BitSource split_substream(uint64_t index) const;

    uint64_t seed() const noexcept { return seed_; }
    uint64_t bits_consumed() const noexcept { return consumed_; }
    void reset_counter() noexcept { consumed_ = 0; }

    /// Append every bit handed out from now on (including by substreams
    /// split later) to a shared tape.
    void start_recording();
    DrawTape recorded() const;

private:
    struct Recorder {
        std::mutex mutex;
        DrawTape tape;
    };

    void refill() noexcept;
    unsigned flip_hooked();
    uint64_t next_generated() noexcept;

    uint64_t seed_ = 0;
    uint64_t state_ = 0;
    uint64_t word_ = 0;
    unsigned avail_ = 0;
    uint64_t consumed_ = 0;
    bool hooked_ = false;
    bool fallback_ = false;
    std::shared_ptr<BitProvider> provider_;
    std::shared_ptr<Recorder> recorder_;
};

/// Exact expected number of bits random_int(bound) consumes.
double fdr_expected_bits(uint64_t bound);

} // namespace shufflekit

#endif // SHUFFLEKIT_BITSTREAM_HPP
