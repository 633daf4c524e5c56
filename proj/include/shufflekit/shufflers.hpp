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

#ifndef SHUFFLEKIT_SHUFFLERS_HPP
#define SHUFFLEKIT_SHUFFLERS_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shufflekit/bitstream.hpp"
#include "shufflekit/detail/parallel.hpp"

namespace shufflekit {

/// Block size at or below which MergeShuffle and Rao-Sandelius finish with
/// Fisher-Yates.
inline constexpr size_t kDefaultCutoff = 65536;

/// Rounds (or subtrees) smaller than this many elements run inline instead
/// of forking.
inline constexpr size_t kDefaultGrain = 4096;

struct ShuffleConfig {
    size_t cutoff = kDefaultCutoff;
    unsigned threads = 1;
    uint64_t seed = 0;
    size_t grain = kDefaultGrain;

    void validate() const {
        if (cutoff < 1) throw std::invalid_argument("cutoff must be at least 1");
        if (threads < 1) throw std::invalid_argument("threads must be at least 1");
        if (grain < 1) throw std::invalid_argument("grain must be at least 1");
    }
};

struct ShuffleReport {
    std::string algorithm;
    size_t n = 0;
    uint64_t bits = 0;
    uint64_t wall_ns = 0;
    unsigned threads = 1;
};

/// Two adjacent ranges [start, start+n1) and [start+n1, start+n1+n2).
struct MergeRange {
    size_t start = 0;
    size_t n1 = 0;
    size_t n2 = 0;

    size_t end() const { return start + n1 + n2; }
};

/// The q = 2^levels blocks of a MergeShuffle run. Block i is
/// [boundary(i), boundary(i+1)) with boundary(i) = floor(n*i / q), and
/// levels is the least c with floor(n / 2^c) <= cutoff.
class BlockLayout {
public:
    BlockLayout(size_t n, size_t cutoff) : n_(n) {
        if (cutoff < 1) throw std::invalid_argument("cutoff must be at least 1");
        while ((n_ >> levels_) > cutoff) ++levels_;
        blocks_ = uint64_t{1} << levels_;
    }

    unsigned levels() const { return levels_; }
    uint64_t blocks() const { return blocks_; }

    size_t boundary(uint64_t i) const {
        __extension__ using u128 = unsigned __int128;
        u128 prod = static_cast<u128>(n_) * i;
        return static_cast<size_t>(prod >> levels_);
    }

private:
    size_t n_;
    unsigned levels_ = 0;
    uint64_t blocks_ = 1;
};

namespace detail {

template <class T>
inline void swap_distinct(std::span<T> arr, size_t a, size_t b) {
    if (a != b) std::swap(arr[a], arr[b]);
}

inline void check_range(size_t size, const MergeRange &range) {
    if (range.start > size || range.n1 > size - range.start || range.n2 > size - range.start - range.n1)
        throw std::out_of_range("merge range exceeds array bounds");
}

} // namespace detail

/// Classical Fisher-Yates: position i swaps with a uniform position in [0, i].
template <class T>
void fisher_yates(std::span<T> arr, BitSource &src) {
    for (size_t i = arr.size(); i-- > 1;) {
        size_t j = static_cast<size_t>(src.random_int(i + 1));
        detail::swap_distinct(arr, i, j);
    }
}

/// In-place shuffled merge of two adjacent, independently shuffled ranges.
///
/// Phase one flips a coin per output slot and takes the next element from
/// the first range on 0 and from the second range on 1, stopping on the
/// first flip that selects an exhausted range. Phase two inserts whatever
/// remains with Fisher-Yates steps over the already-merged prefix. An empty
/// side returns immediately without drawing.
template <class T>
void merge(std::span<T> arr, const MergeRange &range, BitSource &src) {
    detail::check_range(arr.size(), range);
    if (range.n1 == 0 || range.n2 == 0) return;
    const size_t s = range.start;
    const size_t n = range.end();
    size_t i = s;
    size_t j = s + range.n1;
    for (;;) {
        if (src.flip() == 0) {
            if (i == j) break;
        } else {
            if (j == n) break;
            std::swap(arr[i], arr[j]);
            ++j;
        }
        ++i;
    }
    for (; i < n; ++i) {
        size_t m = s + static_cast<size_t>(src.random_int(i - s + 1));
        detail::swap_distinct(arr, i, m);
    }
}

/// Sequential MergeShuffle: Fisher-Yates on each block of the layout, then
/// rounds of pairwise merges until a single block remains. All draws come
/// from `src`.
template <class T>
ShuffleReport merge_shuffle(std::span<T> arr, const ShuffleConfig &cfg, BitSource &src) {
    cfg.validate();
    detail::Stopwatch clock;
    const uint64_t before = src.bits_consumed();
    const BlockLayout layout(arr.size(), cfg.cutoff);
    const uint64_t q = layout.blocks();

    for (uint64_t i = 0; i < q; ++i) {
        size_t lo = layout.boundary(i);
        fisher_yates(arr.subspan(lo, layout.boundary(i + 1) - lo), src);
    }
    for (uint64_t p = 1; p < q; p *= 2) {
        for (uint64_t i = 0; i < q; i += 2 * p) {
            size_t j = layout.boundary(i);
            size_t k = layout.boundary(i + p);
            size_t l = layout.boundary(i + 2 * p);
            merge(arr, MergeRange{j, k - j, l - k}, src);
        }
    }
    return ShuffleReport{"merge", arr.size(), src.bits_consumed() - before, clock.elapsed_ns(), 1};
}

/// Substream index used by merge_shuffle_parallel for task `task` of round
/// `round` (round 0 is the Fisher-Yates pass) when the layout has q blocks.
inline uint64_t merge_task_stream(uint64_t round, uint64_t task, uint64_t q) { return round * q + task; }

/// Parallel MergeShuffle. Same block layout and rounds as merge_shuffle,
/// but every task (a block shuffle or one pairwise merge) draws from its
/// own substream src.split_substream(merge_task_stream(round, task, q)).
/// The output therefore depends on the seed only, never on the thread
/// count; `src` itself is not advanced. When `task_bits` is given it
/// receives the bit count of every task in schedule order (round 0 tasks
/// first).
template <class T>
ShuffleReport merge_shuffle_parallel(std::span<T> arr, const ShuffleConfig &cfg, const BitSource &src,
                                     std::vector<uint64_t> *task_bits = nullptr) {
    cfg.validate();
    detail::Stopwatch clock;
    const BlockLayout layout(arr.size(), cfg.cutoff);
    const int64_t q = static_cast<int64_t>(layout.blocks());
    const int threads = static_cast<int>(cfg.threads);
    const bool fork = threads > 1 && arr.size() >= cfg.grain;
    if (task_bits) task_bits->assign(static_cast<size_t>(2 * q - 1), 0);

    detail::ExceptionSink sink;
    uint64_t bits = 0;
    size_t slot = 0;

#pragma omp parallel for num_threads(threads) schedule(dynamic, 1) reduction(+ : bits) if (fork && q > 1)
    for (int64_t b = 0; b < q; ++b) {
        try {
            BitSource sub = src.split_substream(merge_task_stream(0, static_cast<uint64_t>(b), static_cast<uint64_t>(q)));
            size_t lo = layout.boundary(static_cast<uint64_t>(b));
            fisher_yates(arr.subspan(lo, layout.boundary(static_cast<uint64_t>(b) + 1) - lo), sub);
            bits += sub.bits_consumed();
            if (task_bits) (*task_bits)[static_cast<size_t>(b)] = sub.bits_consumed();
        } catch (...) {
            sink.capture();
        }
    }
    sink.rethrow();
    slot = static_cast<size_t>(q);

    uint64_t round = 1;
    for (int64_t p = 1; p < q; p *= 2, ++round) {
        const int64_t tasks = q / (2 * p);
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1) reduction(+ : bits) if (fork && tasks > 1)
        for (int64_t t = 0; t < tasks; ++t) {
            try {
                const uint64_t i = static_cast<uint64_t>(t * 2 * p);
                const uint64_t up = static_cast<uint64_t>(p);
                BitSource sub = src.split_substream(merge_task_stream(round, static_cast<uint64_t>(t), static_cast<uint64_t>(q)));
                size_t j = layout.boundary(i);
                size_t k = layout.boundary(i + up);
                size_t l = layout.boundary(i + 2 * up);
                merge(arr, MergeRange{j, k - j, l - k}, sub);
                bits += sub.bits_consumed();
                if (task_bits) (*task_bits)[slot + static_cast<size_t>(t)] = sub.bits_consumed();
            } catch (...) {
                sink.capture();
            }
        }
        sink.rethrow();
        slot += static_cast<size_t>(tasks);
    }
    return ShuffleReport{"merge", arr.size(), bits, clock.elapsed_ns(), cfg.threads};
}

} // namespace shufflekit

#endif // SHUFFLEKIT_SHUFFLERS_HPP
