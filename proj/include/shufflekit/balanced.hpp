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

#ifndef SHUFFLEKIT_BALANCED_HPP
#define SHUFFLEKIT_BALANCED_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "shufflekit/shufflers.hpp"

namespace shufflekit {

/// Binary word with exactly n0 zeros and n1 ones.
struct BalancedWord {
    std::vector<uint8_t> bits;
    size_t n0 = 0;
    size_t n1 = 0;

    size_t size() const { return bits.size(); }
    bool operator==(const BalancedWord &) const = default;
};

/// How interleave() combines a left range of `left` elements with a right
/// range of `right` elements: output slot i takes the next left element
/// when word.bits[i] is 0 and the next right element otherwise.
struct InterleaveSpec {
    BalancedWord word;
    size_t left = 0;
    size_t right = 0;

    void validate() const {
        if (word.n0 != left || word.n1 != right || word.size() != left + right)
            throw std::invalid_argument("interleave spec does not match its word");
        if (static_cast<size_t>(std::count(word.bits.begin(), word.bits.end(), uint8_t{1})) != right)
            throw std::invalid_argument("interleave word has the wrong number of ones");
    }
};

/// Arithmetic used to draw the number of zeros in the left half of a word.
enum class SplitArithmetic {
    automatic, ///< exact when the weights are small, else floating point with exact fallback
    exact,     ///< big-integer cumulative weights throughout
    floating,  ///< double-precision weights with certified margins, exact fallback
};

struct WordSamplerOptions {
    /// Words with at most this many arrangements are drawn as one uniform
    /// rank and unranked; larger ones are split in halves. At most 2^62.
    uint64_t direct_limit = uint64_t{1} << 62;
    SplitArithmetic arithmetic = SplitArithmetic::automatic;
};

/// Uniform word among all words with n0 zeros and n1 ones.
BalancedWord sample_word(size_t n0, size_t n1, BitSource &src, const WordSamplerOptions &opts = {});

/// Number of zeros in the first `left` letters of a uniform word of length
/// left + right holding `zeros` zeros (hypergeometric law). Exact: bits of
/// a uniform real are drawn lazily until its dyadic interval certainly
/// falls inside one bin of the cumulative distribution.
size_t hypergeometric_split(size_t left, size_t right, size_t zeros, BitSource &src,
                            SplitArithmetic arithmetic = SplitArithmetic::automatic);

/// Number of words of length n with k zeros if at most `limit`, else 0.
uint64_t binomial_capped(uint64_t n, uint64_t k, uint64_t limit);

/// Order-preserving interleave of [start, start+n1) and [start+n1, end)
/// according to spec.word, using `scratch` (at least n1+n2 slots).
template <class T>
void interleave(std::span<T> arr, const MergeRange &range, const InterleaveSpec &spec, std::span<T> scratch) {
    detail::check_range(arr.size(), range);
    spec.validate();
    if (spec.left != range.n1 || spec.right != range.n2)
        throw std::invalid_argument("interleave spec does not match the range sizes");
    const size_t len = range.n1 + range.n2;
    if (scratch.size() < len) throw std::invalid_argument("interleave scratch too small");
    if (range.n1 == 0 || range.n2 == 0) return;
    for (size_t i = 0; i < len; ++i) scratch[i] = std::move(arr[range.start + i]);
    size_t a = 0;
    size_t b = range.n1;
    for (size_t i = 0; i < len; ++i) arr[range.start + i] = std::move(scratch[spec.word.bits[i] ? b++ : a++]);
}

template <class T>
void interleave(std::span<T> arr, const MergeRange &range, const InterleaveSpec &spec) {
    std::vector<T> scratch(range.n1 + range.n2);
    interleave(arr, range, spec, std::span<T>(scratch));
}

/// BalancedShuffle, bottom-up: blocks of the MergeShuffle layout are
/// Fisher-Yates shuffled (with cutoff 1 they hold at most two elements),
/// then adjacent blocks are combined in rounds by interleaving them along
/// a uniform word of the exact composition. Needs n slots of scratch.
template <class T>
ShuffleReport balanced_shuffle(std::span<T> arr, const ShuffleConfig &cfg, BitSource &src,
                               const WordSamplerOptions &opts = {}) {
    cfg.validate();
    detail::Stopwatch clock;
    const uint64_t before = src.bits_consumed();
    const BlockLayout layout(arr.size(), cfg.cutoff);
    const uint64_t q = layout.blocks();
    for (uint64_t i = 0; i < q; ++i) {
        size_t lo = layout.boundary(i);
        fisher_yates(arr.subspan(lo, layout.boundary(i + 1) - lo), src);
    }
    std::vector<T> scratch(q > 1 ? arr.size() : 0);
    for (uint64_t p = 1; p < q; p *= 2) {
        for (uint64_t i = 0; i < q; i += 2 * p) {
            size_t j = layout.boundary(i);
            size_t k = layout.boundary(i + p);
            size_t l = layout.boundary(i + 2 * p);
            if (k == j || l == k) continue;
            InterleaveSpec spec{sample_word(k - j, l - k, src, opts), k - j, l - k};
            interleave(arr, MergeRange{j, k - j, l - k}, spec, std::span<T>(scratch));
        }
    }
    return ShuffleReport{"balanced", arr.size(), src.bits_consumed() - before, clock.elapsed_ns(), 1};
}

} // namespace shufflekit

#endif // SHUFFLEKIT_BALANCED_HPP
