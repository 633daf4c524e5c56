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

#ifndef SHUFFLEKIT_CLI_HPP
#define SHUFFLEKIT_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "shufflekit/balanced.hpp"
#include "shufflekit/shufflers.hpp"
#include "shufflekit/splitshuffle.hpp"

namespace shufflekit {

enum class Algorithm { fisher_yates, merge, rao_sandelius, balanced };

std::optional<Algorithm> parse_algorithm(std::string_view name);
std::string_view algorithm_name(Algorithm algo);

/// Cutoff used when none is given: Fisher-Yates leaves of 65536 elements
/// for MergeShuffle and Rao-Sandelius, single elements for BalancedShuffle.
size_t default_cutoff(Algorithm algo);

/// Runs one algorithm as the command line does. MergeShuffle and
/// Rao-Sandelius use their substream-scheduled (parallel) forms, so the
/// output depends on the seed and not on cfg.threads.
template <class T>
ShuffleReport run_algorithm(Algorithm algo, std::span<T> arr, const ShuffleConfig &cfg, BitSource &src) {
    switch (algo) {
    case Algorithm::fisher_yates: {
        detail::Stopwatch clock;
        const uint64_t before = src.bits_consumed();
        fisher_yates(arr, src);
        return ShuffleReport{"fy", arr.size(), src.bits_consumed() - before, clock.elapsed_ns(), 1};
    }
    case Algorithm::merge:
        return merge_shuffle_parallel(arr, cfg, src);
    case Algorithm::rao_sandelius:
        return rs_shuffle_parallel(arr, cfg, src);
    case Algorithm::balanced:
        return balanced_shuffle(arr, cfg, src);
    }
    throw std::logic_error("unknown algorithm");
}

/// One line of `bench` output.
struct BenchRow {
    std::string algorithm;
    size_t n = 0;
    uint64_t trials = 0;
    double mean_bits = 0.0;
    double stddev_bits = 0.0;
    double mean_wall_ns = 0.0;
    unsigned threads = 1;
    uint64_t seed = 0;
};

inline constexpr std::string_view kBenchHeader = "algorithm,n,trials,mean_bits,stddev_bits,mean_wall_ns,threads,seed";

/// Shuffles 0..n-1 `trials` times; trial t draws from
/// BitSource(seed).split_substream(t). Throws if an output is not a
/// permutation.
BenchRow bench_cell(Algorithm algo, size_t n, uint64_t trials, const ShuffleConfig &cfg, uint64_t seed);
std::string format_bench_row(const BenchRow &row);

/// Entry point of the shufflekit tool. Exit codes: 0 ok, 1 verification
/// failure or failed run, 2 usage error.
int run_cli(int argc, const char *const *argv, std::istream &in, std::ostream &out, std::ostream &err);

} // namespace shufflekit

#endif // SHUFFLEKIT_CLI_HPP
