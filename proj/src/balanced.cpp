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

#include "shufflekit/balanced.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

#include <boost/multiprecision/cpp_int.hpp>

namespace shufflekit {

namespace {

__extension__ using u128 = unsigned __int128;
using boost::multiprecision::cpp_int;

// Lazily refined uniform real U in [a / 2^t, (a + 1) / 2^t).
struct DyadicCursor {
    cpp_int a = 0;
    unsigned t = 0;

    void extend(BitSource &src) {
        a <<= 1;
        a += src.flip();
        ++t;
    }
};

// Exact bin search over integer cumulative weights cum[0] = 0 < ... < cum[K].
class ExactSplit {
public:
    ExactSplit(size_t left, size_t right, size_t zeros, size_t lo, size_t hi) {
        cpp_int a = 1; // C(left, lo)
        for (size_t i = 0; i < lo; ++i) a = a * (left - i) / (i + 1);
        cpp_int b = 1; // C(right, zeros - lo)
        size_t rk = zeros - lo;
        for (size_t i = 0; i < rk; ++i) b = b * (right - i) / (i + 1);
        cum_.reserve(hi - lo + 2);
        cum_.emplace_back(0);
        for (size_t j = lo;; ++j) {
            cum_.push_back(cum_.back() + a * b);
            if (j == hi) break;
            // step j -> j + 1: C(left, j+1) and C(right, zeros-j-1)
            a = a * (left - j) / (j + 1);
            b = b * (zeros - j) / (right - zeros + j + 1);
        }
    }

    // Bin index certified for the cursor's interval, or -1 if it straddles.
    long locate(const DyadicCursor &u) const {
        const cpp_int &total = cum_.back();
        cpp_int lo = u.a * total;
        size_t bins = cum_.size() - 1;
        // largest i with cum[i] * 2^t <= lo
        size_t first = 0;
        size_t last = bins - 1;
        while (first < last) {
            size_t mid = (first + last + 1) / 2;
            if ((cum_[mid] << u.t) <= lo)
                first = mid;
            else
                last = mid - 1;
        }
        cpp_int hi = lo + total;
        if (hi <= (cum_[first + 1] << u.t)) return static_cast<long>(first);
        return -1;
    }

private:
    std::vector<cpp_int> cum_;
};

size_t split_exact(size_t left, size_t right, size_t zeros, size_t lo, size_t hi, BitSource &src,
                   DyadicCursor u) {
    ExactSplit split(left, right, zeros, lo, hi);
    for (;;) {
        long bin = split.locate(u);
        if (bin >= 0) return lo + static_cast<size_t>(bin);
        u.extend(src);
    }
}

size_t split_floating(size_t left, size_t right, size_t zeros, size_t lo, size_t hi, BitSource &src) {
    const size_t bins = hi - lo + 1;
    std::vector<double> w(bins, 0.0);
    const double l = static_cast<double>(left);
    const double r = static_cast<double>(right);
    const double k = static_cast<double>(zeros);
    const double m = l + r;
    size_t mode = static_cast<size_t>(std::floor((k + 1) * (l + 1) / (m + 2)));
    mode = std::clamp(mode, lo, hi);
    w[mode - lo] = 1.0;
    for (size_t j = mode + 1; j <= hi; ++j) {
        double jj = static_cast<double>(j);
        w[j - lo] = w[j - 1 - lo] * ((l - jj + 1) * (k - jj + 1)) / (jj * (r - k + jj));
        if (w[j - lo] == 0.0) break;
    }
    for (size_t j = mode; j-- > lo;) {
        double jj = static_cast<double>(j);
        w[j - lo] = w[j + 1 - lo] * ((jj + 1) * (r - k + jj + 1)) / ((l - jj) * (k - jj));
        if (w[j - lo] == 0.0) break;
    }
    double total = 0.0;
    for (double x : w) total += x;
    std::vector<double> cum(bins + 1);
    cum[0] = 0.0;
    double acc = 0.0;
    for (size_t i = 0; i < bins; ++i) {
        acc += w[i];
        cum[i + 1] = acc / total;
    }
    cum[bins] = 1.0;

    // Bound on |cum[i] - exact cumulative|: rounding in the ratio products,
    // the normalisation and the running sum each stay within a few ulps per
    // term.
    const double margin = 16.0 * (m + 16.0) * DBL_EPSILON;
    uint64_t a = 0;
    unsigned t = 0;
    for (;;) {
        a = 2 * a + src.flip();
        ++t;
        double ulo = std::ldexp(static_cast<double>(a), -static_cast<int>(t));
        double uhi = std::ldexp(static_cast<double>(a + 1), -static_cast<int>(t));
        size_t i = static_cast<size_t>(std::upper_bound(cum.begin(), cum.end(), ulo) - cum.begin()) - 1;
        i = std::min(i, bins - 1);
        bool lo_ok = i == 0 || ulo >= cum[i] + margin;
        bool hi_ok = i == bins - 1 || uhi <= cum[i + 1] - margin;
        if (lo_ok && hi_ok) return lo + i;
        if (std::ldexp(1.0, -static_cast<int>(t)) < margin / 4 || t >= 60) {
            DyadicCursor u;
            u.a = a;
            u.t = t;
            return split_exact(left, right, zeros, lo, hi, src, std::move(u));
        }
    }
}

void unrank_word(std::span<uint8_t> out, uint64_t zeros, uint64_t count, uint64_t rank) {
    uint64_t rem = out.size();
    for (auto &letter : out) {
        if (zeros == 0) {
            letter = 1;
        } else if (zeros == rem) {
            letter = 0;
            --zeros;
        } else {
            // words starting with 0: C(rem - 1, zeros - 1) = count * zeros / rem
            uint64_t with_zero = static_cast<uint64_t>(static_cast<u128>(count) * zeros / rem);
            if (rank < with_zero) {
                letter = 0;
                count = with_zero;
                --zeros;
            } else {
                letter = 1;
                rank -= with_zero;
                count -= with_zero;
            }
        }
        --rem;
    }
}

void fill_word(std::span<uint8_t> out, size_t zeros, BitSource &src, const WordSamplerOptions &opts) {
    const size_t m = out.size();
    if (zeros == 0) {
        std::fill(out.begin(), out.end(), uint8_t{1});
        return;
    }
    if (zeros == m) {
        std::fill(out.begin(), out.end(), uint8_t{0});
        return;
    }
    uint64_t count = binomial_capped(m, zeros, opts.direct_limit);
    if (count != 0) {
        unrank_word(out, zeros, count, src.random_int(count));
        return;
    }
    const size_t left = m / 2;
    const size_t left_zeros = hypergeometric_split(left, m - left, zeros, src, opts.arithmetic);
    fill_word(out.first(left), left_zeros, src, opts);
    fill_word(out.subspan(left), zeros - left_zeros, src, opts);
}

} // namespace

uint64_t binomial_capped(uint64_t n, uint64_t k, uint64_t limit) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    u128 c = 1;
    for (uint64_t i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i;
        if (c > limit) return 0;
    }
    return static_cast<uint64_t>(c);
}

size_t hypergeometric_split(size_t left, size_t right, size_t zeros, BitSource &src, SplitArithmetic arithmetic) {
    if (zeros > left + right) throw std::invalid_argument("hypergeometric_split: more zeros than letters");
    const size_t lo = zeros > right ? zeros - right : 0;
    const size_t hi = std::min(left, zeros);
    if (lo == hi) return lo;
    bool exact = arithmetic == SplitArithmetic::exact ||
                 (arithmetic == SplitArithmetic::automatic &&
                  binomial_capped(left + right, zeros, uint64_t{1} << 62) != 0);
    if (exact) return split_exact(left, right, zeros, lo, hi, src, DyadicCursor{});
    return split_floating(left, right, zeros, lo, hi, src);
}

BalancedWord sample_word(size_t n0, size_t n1, BitSource &src, const WordSamplerOptions &opts) {
    if (opts.direct_limit > (uint64_t{1} << 62) || opts.direct_limit < 1)
        throw std::invalid_argument("direct_limit must lie in [1, 2^62]");
    BalancedWord word;
    word.n0 = n0;
    word.n1 = n1;
    word.bits.resize(n0 + n1);
    fill_word(word.bits, n0, src, opts);
    return word;
}

} // namespace shufflekit
