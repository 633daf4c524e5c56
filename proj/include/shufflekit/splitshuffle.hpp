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

#ifndef SHUFFLEKIT_SPLITSHUFFLE_HPP
#define SHUFFLEKIT_SPLITSHUFFLE_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <iterator>
#include <span>
#include <vector>

#include "shufflekit/shufflers.hpp"

namespace shufflekit {

/// A range of the array being split, and how many splits led to it.
struct SplitNode {
    size_t start = 0;
    size_t length = 0;
    uint64_t depth = 0;
};

namespace detail {

// Stable two-way partition of node's range by one flip per element: the
// 0-group stays in front, the 1-group is parked in the same positions of
// `scratch` and moved back behind it. Returns the size of the 0-group.
template <class T>
size_t split_range(std::span<T> arr, std::span<T> scratch, const SplitNode &node, BitSource &src) {
    const size_t end = node.start + node.length;
    size_t zeros = node.start;
    size_t ones = node.start;
    for (size_t i = node.start; i < end;) {
        unsigned chunk = static_cast<unsigned>(std::min<size_t>(64, end - i));
        uint64_t word = src.take_bits(chunk);
        for (unsigned b = chunk; b-- > 0; ++i) {
            if ((word >> b) & 1U)
                scratch[ones++] = std::move(arr[i]);
            else
                arr[zeros++] = std::move(arr[i]);
        }
    }
    std::move(scratch.begin() + static_cast<std::ptrdiff_t>(node.start),
              scratch.begin() + static_cast<std::ptrdiff_t>(ones),
              arr.begin() + static_cast<std::ptrdiff_t>(zeros));
    return zeros - node.start;
}

template <class T>
void rs_recurse(std::span<T> arr, std::span<T> scratch, SplitNode node, size_t cutoff, BitSource &src) {
    if (node.length <= cutoff) {
        fisher_yates(arr.subspan(node.start, node.length), src);
        return;
    }
    size_t zeros = split_range(arr, scratch, node, src);
    // A split with all flips equal recurses on the whole range again.
    rs_recurse(arr, scratch, SplitNode{node.start, zeros, node.depth + 1}, cutoff, src);
    rs_recurse(arr, scratch, SplitNode{node.start + zeros, node.length - zeros, node.depth + 1}, cutoff, src);
}

template <class T>
struct RsParallelJob {
    RsParallelJob(std::span<T> a, std::span<T> s, const BitSource *r, size_t c, size_t g, bool f)
        : arr(a), scratch(s), root(r), cutoff(c), grain(g), fork(f) {}

    std::span<T> arr;
    std::span<T> scratch;
    const BitSource *root;
    size_t cutoff;
    size_t grain;
    bool fork;
    std::atomic<uint64_t> bits{0};
    ExceptionSink sink;
};

template <class T>
void rs_parallel_node(RsParallelJob<T> *job, SplitNode node) {
    try {
        BitSource sub = job->root->split_substream(node.depth * (job->arr.size() + 1) + node.start);
        if (node.length <= job->cutoff) {
            fisher_yates(job->arr.subspan(node.start, node.length), sub);
            job->bits += sub.bits_consumed();
            return;
        }
        size_t zeros = split_range(job->arr, job->scratch, node, sub);
        job->bits += sub.bits_consumed();
        SplitNode left{node.start, zeros, node.depth + 1};
        SplitNode right{node.start + zeros, node.length - zeros, node.depth + 1};
        if (job->fork && left.length >= job->grain) {
#pragma omp task firstprivate(job, left)
            rs_parallel_node(job, left);
        } else {
            rs_parallel_node(job, left);
        }
        rs_parallel_node(job, right);
    } catch (...) {
        job->sink.capture();
    }
}

} // namespace detail

/// Substream index of a node in rs_shuffle_parallel: nodes are keyed by
/// (depth, range start), unique because ranges at one depth are disjoint.
inline uint64_t rs_node_stream(const SplitNode &node, size_t n) { return node.depth * (n + 1) + node.start; }

/// Rao-Sandelius splitting shuffle with two-way splits. Each element of a
/// range draws one bit; the range is stably partitioned into the 0-group
/// followed by the 1-group and both parts recurse. Ranges of at most
/// cfg.cutoff elements are finished with Fisher-Yates. Uses one scratch
/// buffer of the array's size.
template <class T>
ShuffleReport rs_shuffle(std::span<T> arr, const ShuffleConfig &cfg, BitSource &src) {
    cfg.validate();
    detail::Stopwatch clock;
    const uint64_t before = src.bits_consumed();
    if (arr.size() > cfg.cutoff) {
        std::vector<T> scratch(arr.size());
        detail::rs_recurse(arr, std::span<T>(scratch), SplitNode{0, arr.size(), 0}, cfg.cutoff, src);
    } else {
        fisher_yates(arr, src);
    }
    return ShuffleReport{"rs", arr.size(), src.bits_consumed() - before, clock.elapsed_ns(), 1};
}

/// Parallel Rao-Sandelius. Every node of the split tree draws from
/// src.split_substream(rs_node_stream(node, n)), so the result depends on
/// the seed only. Subtrees of at least cfg.grain elements are spawned as
/// tasks when cfg.threads > 1.
template <class T>
ShuffleReport rs_shuffle_parallel(std::span<T> arr, const ShuffleConfig &cfg, const BitSource &src) {
    cfg.validate();
    detail::Stopwatch clock;
    std::vector<T> scratch(arr.size() > cfg.cutoff ? arr.size() : 0);
    detail::RsParallelJob<T> job(arr, std::span<T>(scratch), &src, cfg.cutoff, cfg.grain,
                                 cfg.threads > 1 && arr.size() >= cfg.grain);
    detail::RsParallelJob<T> *jp = &job;
#pragma omp parallel num_threads(static_cast<int>(cfg.threads)) if (job.fork)
#pragma omp single
    detail::rs_parallel_node(jp, SplitNode{0, arr.size(), 0});
    job.sink.rethrow();
    return ShuffleReport{"rs", arr.size(), job.bits.load(), clock.elapsed_ns(), cfg.threads};
}

} // namespace shufflekit

#endif // SHUFFLEKIT_SPLITSHUFFLE_HPP
