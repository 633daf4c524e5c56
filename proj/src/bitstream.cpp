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

#include "shufflekit/bitstream.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace shufflekit {

namespace {

// Serves a single tape to a whole family of sources, in request order.
class TapeProvider final : public BitProvider {
public:
    explicit TapeProvider(DrawTape tape) : tape_(std::move(tape)) {}

    int next_bit(uint64_t) override {
        std::lock_guard lock(mutex_);
        if (cursor_ >= tape_.bits.size()) return -1;
        return tape_.bits[cursor_++];
    }

private:
    std::mutex mutex_;
    DrawTape tape_;
    size_t cursor_ = 0;
};

} // namespace

DrawTape DrawTape::parse(std::string_view text) {
    DrawTape tape;
    tape.bits.reserve(text.size());
    for (char c : text) {
        if (c == '0' || c == '1')
            tape.bits.push_back(static_cast<uint8_t>(c - '0'));
        else if (c == '\n' || c == '\r')
            continue;
        else
            throw std::invalid_argument(std::string("invalid character in draw tape: '") + c + "'");
    }
    return tape;
}

std::string DrawTape::to_string() const {
    std::string out;
    out.reserve(bits.size() + 1);
    for (uint8_t b : bits) out.push_back(b ? '1' : '0');
    out.push_back('\n');
    return out;
}

DrawTape read_tape_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tape file " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return DrawTape::parse(text);
}

void write_tape_file(const std::filesystem::path &path, const DrawTape &tape) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write tape file " + path.string());
    out << tape.to_string();
}

BitSource::BitSource(uint64_t seed) noexcept : seed_(seed), state_(seed) {}

BitSource BitSource::from_tape(DrawTape tape) {
    return from_provider(std::make_shared<TapeProvider>(std::move(tape)), 0);
}

BitSource BitSource::from_tape(DrawTape tape, uint64_t fallback_seed) {
    BitSource src = from_provider(std::make_shared<TapeProvider>(std::move(tape)), fallback_seed);
    src.fallback_ = true;
    return src;
}

BitSource BitSource::from_provider(std::shared_ptr<BitProvider> provider, uint64_t stream_key) {
    BitSource src(stream_key);
    src.provider_ = std::move(provider);
    src.hooked_ = true;
    return src;
}

void BitSource::refill() noexcept {
    word_ = next_generated();
    avail_ = 64;
}

uint64_t BitSource::next_generated() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
}

unsigned BitSource::flip_hooked() {
    int b = -1;
    if (provider_) {
        b = provider_->next_bit(seed_);
        if (b < 0) {
            if (!fallback_) throw TapeExhausted();
            // Tape done: continue on this stream's own generator.
            provider_.reset();
            hooked_ = static_cast<bool>(recorder_);
        }
    }
    if (b < 0) {
        if (avail_ == 0) refill();
        b = static_cast<int>(word_ >> 63);
        word_ <<= 1;
        --avail_;
    }
    ++consumed_;
    if (recorder_) {
        std::lock_guard lock(recorder_->mutex);
        recorder_->tape.bits.push_back(static_cast<uint8_t>(b));
    }
    return static_cast<unsigned>(b);
}

uint64_t BitSource::take_bits(unsigned count) {
    if (count > 64) throw std::invalid_argument("take_bits: count exceeds 64");
    if (count == 0) return 0;
    if (hooked_) {
        if (recorder_ || !provider_) {
            uint64_t r = 0;
            for (unsigned i = 0; i < count; ++i) r = (r << 1) | flip();
            return r;
        }
        uint64_t head = 0;
        unsigned got = provider_->next_bits(seed_, count, head);
        consumed_ += got;
        if (got == count) return head;
        if (!fallback_) throw TapeExhausted();
        provider_.reset();
        hooked_ = false;
        unsigned rest = count - got;
        return (got == 0 ? 0 : head << rest) | take_bits(rest);
    }
    uint64_t r;
    if (avail_ >= count) {
        r = count == 64 ? word_ : word_ >> (64 - count);
        word_ = count == 64 ? 0 : word_ << count;
        avail_ -= count;
    } else {
        unsigned head = avail_;
        unsigned rest = count - head;
        r = head == 0 ? 0 : word_ >> (64 - head);
        refill();
        r = (rest == 64 ? 0 : r << rest) | (word_ >> (64 - rest));
        word_ = rest == 64 ? 0 : word_ << rest;
        avail_ -= rest;
    }
    consumed_ += count;
    return r;
}

uint64_t BitSource::random_int(uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("random_int: bound must be positive");
    if (bound > (uint64_t{1} << 63)) throw std::invalid_argument("random_int: bound exceeds 2^63");
    if (bound == 1) return 0;
    // The first ceil(log2 bound) steps never stop early, so they are drawn at once.
    unsigned width = static_cast<unsigned>(std::bit_width(bound - 1));
    uint64_t v = uint64_t{1} << width;
    uint64_t d = take_bits(width);
    for (;;) {
        if (v >= bound) {
            if (d < bound) return d;
            v -= bound;
            d -= bound;
        }
        d = 2 * d + flip();
        v = 2 * v;
    }
}

BitSource BitSource::split_substream(uint64_t index) const {
    BitSource child(derive_seed(seed_, index));
    child.provider_ = provider_;
    child.recorder_ = recorder_;
    child.fallback_ = fallback_;
    child.hooked_ = provider_ || recorder_;
    return child;
}

void BitSource::start_recording() {
    if (!recorder_) recorder_ = std::make_shared<Recorder>();
    hooked_ = true;
}

DrawTape BitSource::recorded() const {
    if (!recorder_) return {};
    std::lock_guard lock(recorder_->mutex);
    return recorder_->tape;
}

double fdr_expected_bits(uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("fdr_expected_bits: bound must be positive");
    if (bound == 1) return 0.0;
    // Survival probability is a deterministic function of the step: the
    // range v evolves independently of the drawn bits.
    unsigned width = static_cast<unsigned>(std::bit_width(bound - 1));
    double expected = width;
    double survive = 1.0;
    uint64_t v = uint64_t{1} << width;
    for (int step = 0; step < 4096; ++step) {
        survive *= static_cast<double>(v - bound) / static_cast<double>(v);
        v -= bound;
        if (survive < 1e-30) break;
        while (v < bound) {
            v *= 2;
            expected += survive;
        }
    }
    return expected;
}

} // namespace shufflekit
