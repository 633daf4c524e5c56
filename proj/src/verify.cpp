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

#include "shufflekit/verify.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/chi_squared.hpp>

namespace shufflekit {

uint64_t factorial(unsigned n) {
    if (n > 20) throw std::overflow_error("factorial exceeds 64 bits");
    uint64_t f = 1;
    for (unsigned i = 2; i <= n; ++i) f *= i;
    return f;
}

uint64_t lehmer_rank(std::span<const uint32_t> perm) {
    const size_t n = perm.size();
    uint64_t rank = 0;
    for (size_t i = 0; i < n; ++i) {
        uint64_t smaller = 0;
        for (size_t j = i + 1; j < n; ++j)
            if (perm[j] < perm[i]) ++smaller;
        rank = rank * (n - i) + smaller;
    }
    return rank;
}

std::vector<uint32_t> lehmer_unrank(uint64_t rank, unsigned n) {
    if (rank >= factorial(n)) throw std::out_of_range("lehmer_unrank: rank out of range");
    std::vector<uint32_t> digits(n);
    for (unsigned k = 0; k < n; ++k) {
        // digit of weight k! belongs to position n-1-k, radix k+1
        digits[n - 1 - k] = static_cast<uint32_t>(rank % (k + 1));
        rank /= (k + 1);
    }
    std::vector<uint32_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0U);
    std::vector<uint32_t> perm(n);
    for (unsigned i = 0; i < n; ++i) {
        perm[i] = pool[digits[i]];
        pool.erase(pool.begin() + digits[i]);
    }
    return perm;
}

Dyadic Dyadic::normalized() const {
    Dyadic d = *this;
    if (d.numerator == 0) {
        d.exponent = 0;
        return d;
    }
    unsigned shift = static_cast<unsigned>(boost::multiprecision::lsb(d.numerator));
    shift = std::min(shift, d.exponent);
    d.numerator >>= shift;
    d.exponent -= shift;
    return d;
}

double Dyadic::to_double() const { return std::ldexp(numerator.convert_to<double>(), -static_cast<int>(exponent)); }

bool Dyadic::operator==(const Dyadic &other) const {
    Dyadic a = normalized();
    Dyadic b = other.normalized();
    return a.numerator == b.numerator && a.exponent == b.exponent;
}

Dyadic DistributionTable::mass(uint64_t rank) const {
    auto it = masses.find(rank);
    return it == masses.end() ? Dyadic{} : it->second;
}

bool DistributionTable::conserves_mass() const {
    // bring everything to the common exponent bit_cap
    BigInt total = 0;
    auto add = [&](const Dyadic &d) {
        if (d.exponent > bit_cap) throw std::logic_error("mass finer than the bit cap");
        total += d.numerator << (bit_cap - d.exponent);
    };
    for (const auto &[rank, m] : masses) add(m);
    add(residual);
    return total == (BigInt(1) << bit_cap);
}

void DistributionTable::write_csv(std::ostream &out) const {
    out << "rank,mass_numerator,mass_exponent\n";
    for (const auto &[rank, m] : masses) out << rank << ',' << m.numerator << ',' << m.exponent << '\n';
    out << "residual," << residual.numerator << ',' << residual.exponent << '\n';
}

namespace {

// Serves per-stream bit prefixes for a depth-first walk of the bit tree.
// A request past a stream's prefix appends a 0 and records it as a
// decision; the walk then backtracks by turning the latest 0 decision into
// a 1. Once a path holds bit_cap decisions it is truncated: the remaining
// requests are answered from a fixed generator so the run can finish, and
// its outcome is discarded.
class TreeProvider final : public BitProvider {
public:
    explicit TreeProvider(unsigned bit_cap) : bit_cap_(bit_cap) {}

    int next_bit(uint64_t key) override {
        SpinGuard lock(busy_);
        return bit_locked(key);
    }

    unsigned next_bits(uint64_t key, unsigned count, uint64_t &out) override {
        SpinGuard lock(busy_);
        out = 0;
        for (unsigned i = 0; i < count; ++i) out = (out << 1) | static_cast<uint64_t>(bit_locked(key));
        return count;
    }

    void rewind() {
        for (Stream &s : streams_) s.cursor = 0;
        truncated_ = false;
    }

    bool truncated() const { return truncated_; }
    unsigned depth() const { return static_cast<unsigned>(decisions_.size()); }

    bool all_consumed() const {
        return std::all_of(streams_.begin(), streams_.end(), [](const Stream &s) { return s.cursor == s.bits.size(); });
    }

    /// Moves to the next unexplored subtree; false when the walk is done.
    bool advance() {
        while (!decisions_.empty()) {
            std::vector<uint8_t> &bits = streams_[decisions_.back()].bits;
            if (bits.back() == 0) {
                bits.back() = 1;
                return true;
            }
            bits.pop_back();
            decisions_.pop_back();
        }
        return false;
    }

private:
    int bit_locked(uint64_t key) {
        if (truncated_) return static_cast<int>(mix64(++filler_) >> 63);
        Stream &s = stream(key);
        if (s.cursor < s.bits.size()) return s.bits[s.cursor++];
        if (decisions_.size() == bit_cap_) {
            truncated_ = true;
            return static_cast<int>(mix64(++filler_) >> 63);
        }
        s.bits.push_back(0);
        ++s.cursor;
        decisions_.push_back(static_cast<uint32_t>(last_));
        return 0;
    }

    struct Stream {
        uint64_t key = 0;
        std::vector<uint8_t> bits;
        size_t cursor = 0;
    };

    Stream &stream(uint64_t key) {
        if (last_ < streams_.size() && streams_[last_].key == key) return streams_[last_];
        for (size_t i = 0; i < streams_.size(); ++i) {
            if (streams_[i].key == key) {
                last_ = i;
                return streams_[i];
            }
        }
        streams_.push_back(Stream{key, {}, 0});
        last_ = streams_.size() - 1;
        return streams_.back();
    }

    // Requests are short and rarely contended; a spinlock keeps the
    // single-threaded walk cheap.
    struct SpinGuard {
        explicit SpinGuard(std::atomic_flag &f) : flag(f) {
            while (flag.test_and_set(std::memory_order_acquire)) std::this_thread::yield();
        }
        ~SpinGuard() { flag.clear(std::memory_order_release); }
        std::atomic_flag &flag;
    };

    std::atomic_flag busy_;
    unsigned bit_cap_;
    std::vector<Stream> streams_;
    std::vector<uint32_t> decisions_; // stream index of each decision, oldest first
    size_t last_ = 0;
    bool truncated_ = false;
    uint64_t filler_ = 0;
};

} // namespace

DistributionTable exact_distribution(const ShuffleProcedure &shuffle, unsigned n, unsigned bit_cap) {
    if (bit_cap == 0) throw std::invalid_argument("exact_distribution: bit_cap must be positive");
    if (n > 12) throw std::invalid_argument("exact_distribution: n too large for a full table");

    auto provider = std::make_shared<TreeProvider>(bit_cap);
    // leaf counts per rank, indexed by path length
    std::map<uint64_t, std::vector<uint64_t>> counts;
    uint64_t truncated = 0;
    uint64_t leaves = 0;
    std::vector<uint32_t> arr(n);
    std::vector<uint32_t> sorted(n);

    do {
        provider->rewind();
        std::iota(arr.begin(), arr.end(), 0U);
        BitSource src = BitSource::from_provider(provider, 0);
        shuffle(std::span<uint32_t>(arr), src);
        if (provider->truncated()) {
            ++truncated;
            continue;
        }
        if (!provider->all_consumed())
            throw std::logic_error("exact_distribution: procedure did not consume a bit it requested earlier");
        std::copy(arr.begin(), arr.end(), sorted.begin());
        std::sort(sorted.begin(), sorted.end());
        for (uint32_t i = 0; i < n; ++i)
            if (sorted[i] != i) throw std::logic_error("exact_distribution: output is not a permutation");
        auto &per_depth = counts[lehmer_rank(arr)];
        if (per_depth.empty()) per_depth.resize(bit_cap + 1);
        ++per_depth[provider->depth()];
        ++leaves;
    } while (provider->advance());

    DistributionTable table;
    table.n = n;
    table.bit_cap = bit_cap;
    table.leaves = leaves;
    for (auto &[rank, per_depth] : counts) {
        BigInt units = 0;
        for (unsigned d = 0; d <= bit_cap; ++d) units += BigInt(per_depth[d]) << (bit_cap - d);
        table.masses[rank] = Dyadic{units, bit_cap}.normalized();
    }
    table.residual = Dyadic{BigInt(truncated), bit_cap}.normalized();
    return table;
}

UniformityCheck check_uniformity(const DistributionTable &table, unsigned tolerance_exp, unsigned residual_exp,
                                 bool residual_slack) {
    UniformityCheck check;
    const uint64_t count = factorial(table.n);
    const unsigned cap = table.bit_cap;
    // Work in units of 2^-(cap + tolerance_exp) scaled by n!, so every
    // comparison is between integers.
    const BigInt one = BigInt(1) << (cap + tolerance_exp);
    auto scaled = [&](const Dyadic &d) { return (d.numerator << (cap + tolerance_exp - d.exponent)) * count; };
    const BigInt tol = (BigInt(1) << cap) * count;
    const BigInt slack = residual_slack ? scaled(table.residual) : BigInt(0);

    check.masses_ok = table.masses.size() == count;
    for (uint64_t rank = 0; rank < count; ++rank) {
        BigInt m = scaled(table.mass(rank));
        if (m > one + tol || m + tol + slack < one) check.masses_ok = false;
        double dev = std::fabs(table.mass(rank).to_double() - 1.0 / static_cast<double>(count));
        check.max_deviation = std::max(check.max_deviation, dev);
    }
    check.residual = table.residual.to_double();
    check.residual_ok = (table.residual.numerator << residual_exp) < (BigInt(1) << table.residual.exponent);
    return check;
}

double chi_square_statistic(std::span<const uint64_t> counts) {
    if (counts.empty()) throw std::invalid_argument("chi_square_statistic: no bins");
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), uint64_t{0}));
    const double expected = total / static_cast<double>(counts.size());
    double stat = 0.0;
    for (uint64_t c : counts) {
        double d = static_cast<double>(c) - expected;
        stat += d * d / expected;
    }
    return stat;
}

double chi_square_quantile(uint64_t dof, double level) {
    boost::math::chi_squared dist(static_cast<double>(dof));
    return boost::math::quantile(dist, level);
}

ChiSquareResult chi_square_from_counts(std::vector<uint64_t> counts, double level) {
    ChiSquareResult r;
    r.statistic = chi_square_statistic(counts);
    r.dof = counts.size() - 1;
    r.threshold = chi_square_quantile(r.dof, level);
    r.pass = r.statistic < r.threshold;
    r.counts = std::move(counts);
    return r;
}

ChiSquareResult chi_square_uniformity(const ShuffleProcedure &shuffle, unsigned n, uint64_t trials, uint64_t seed,
                                      double level) {
    if (n < 2) throw std::invalid_argument("chi_square_uniformity: need n >= 2");
    const uint64_t bins = factorial(n);
    if (trials < 10 * bins) throw std::invalid_argument("chi_square_uniformity: fewer than 10 n! trials");
    std::vector<uint64_t> counts(bins, 0);
    const BitSource root(seed);
    std::vector<uint32_t> arr(n);
    for (uint64_t t = 0; t < trials; ++t) {
        std::iota(arr.begin(), arr.end(), 0U);
        BitSource src = root.split_substream(t);
        shuffle(std::span<uint32_t>(arr), src);
        ++counts[lehmer_rank(arr)];
    }
    return chi_square_from_counts(std::move(counts), level);
}

CostModel ceil_log2_cost() {
    return CostModel{"ceil_log2", [](uint64_t k) { return k <= 1 ? 0.0 : static_cast<double>(std::bit_width(k - 1)); }};
}

CostModel fdr_cost() { return CostModel{"fdr", [](uint64_t k) { return fdr_expected_bits(k); }}; }

namespace {

// prefix[k] = sum of per_draw_cost(j) for j in [1, k]
std::vector<long double> cumulative_cost(const CostModel &model, uint64_t max) {
    std::vector<long double> prefix(max + 1, 0.0L);
    for (uint64_t k = 1; k <= max; ++k) prefix[k] = prefix[k - 1] + model.per_draw_cost(k);
    return prefix;
}

long double merge_bits_with(uint64_t n1, uint64_t n2, const std::vector<long double> &prefix) {
    if (n1 == 0 || n2 == 0) return 0.0L;
    const uint64_t n = n1 + n2;
    const long double ln2 = std::log(2.0L);
    long double total = 0.0L;
    // Phase one ends at the (a+1)-th flip choosing the side of size a, after
    // i flips choosing the other side: probability C(a+i, a) / 2^(a+1+i).
    for (auto [a, b] : {std::pair{n1, n2}, std::pair{n2, n1}}) {
        long double log_w = -static_cast<long double>(a + 1) * ln2;
        long double peak = log_w;
        for (uint64_t i = 0; i <= b; ++i) {
            if (i > 0) log_w += std::log(static_cast<long double>(a + i) / static_cast<long double>(i)) - ln2;
            peak = std::max(peak, log_w);
            if (i > a && log_w < peak - 140.0L) break;
            const uint64_t m = a + 1 + i;
            const long double draws = prefix[n] - prefix[m - 1];
            total += std::exp(log_w) * (static_cast<long double>(m) + draws);
        }
    }
    return total;
}

} // namespace

double expected_merge_bits(uint64_t n1, uint64_t n2, const CostModel &model) {
    if (n1 == 0 || n2 == 0) return 0.0;
    return static_cast<double>(merge_bits_with(n1, n2, cumulative_cost(model, n1 + n2)));
}

BigRational expected_merge_bits_exact(uint64_t n1, uint64_t n2) {
    if (n1 == 0 || n2 == 0) return 0;
    const uint64_t n = n1 + n2;
    const auto ceil_log2 = [](uint64_t k) -> uint64_t { return k <= 1 ? 0 : std::bit_width(k - 1); };
    std::vector<uint64_t> prefix(n + 1, 0);
    for (uint64_t k = 1; k <= n; ++k) prefix[k] = prefix[k - 1] + ceil_log2(k);
    // All terms over the common denominator 2^(n+1).
    BigInt numerator = 0;
    for (auto [a, b] : {std::pair{n1, n2}, std::pair{n2, n1}}) {
        BigInt binom = 1; // C(a + i, a)
        for (uint64_t i = 0; i <= b; ++i) {
            if (i > 0) binom = binom * (a + i) / i;
            const uint64_t m = a + 1 + i;
            const uint64_t cost = m + (prefix[n] - prefix[m - 1]);
            numerator += (binom << static_cast<unsigned>(n + 1 - m)) * cost;
        }
    }
    return BigRational(numerator, BigInt(1) << static_cast<unsigned>(n + 1));
}

MergeBitBounds merge_bits_bounds(uint64_t n1, uint64_t n2) {
    MergeBitBounds bounds;
    if (n1 == 0 || n2 == 0) return bounds;
    const uint64_t n = n1 + n2;
    const long double ln2 = std::log(2.0L);
    const long double log2n = std::log2(static_cast<long double>(n));
    long double lower = 0.0L;
    long double upper = 0.0L;
    for (auto [a, b] : {std::pair{n1, n2}, std::pair{n2, n1}}) {
        long double log_w = -static_cast<long double>(a + 1) * ln2;
        for (uint64_t i = 0; i <= b; ++i) {
            if (i > 0) log_w += std::log(static_cast<long double>(a + i) / static_cast<long double>(i)) - ln2;
            const long double w = std::exp(log_w);
            const uint64_t m = a + 1 + i;
            const long double remaining = static_cast<long double>(n + 1 - m);
            lower += w * (static_cast<long double>(m) + std::log2(static_cast<long double>(m)) * remaining);
            upper += w * (static_cast<long double>(m) + log2n * remaining);
        }
    }
    bounds.lower = static_cast<double>(lower);
    bounds.upper = static_cast<double>(upper);
    return bounds;
}

double expected_fisher_yates_bits(uint64_t n, const CostModel &model) {
    long double total = 0.0L;
    for (uint64_t k = 2; k <= n; ++k) total += model.per_draw_cost(k);
    return static_cast<double>(total);
}

double expected_total_bits(uint64_t n, uint64_t cutoff, const CostModel &model) {
    if (n == 0 || !std::has_single_bit(n)) throw std::invalid_argument("expected_total_bits: n must be a power of two");
    if (cutoff < 1) throw std::invalid_argument("expected_total_bits: cutoff must be at least 1");
    unsigned levels = 0;
    while ((n >> levels) > cutoff) ++levels;
    const uint64_t q = uint64_t{1} << levels;
    const uint64_t block = n >> levels;
    const auto prefix = cumulative_cost(model, n);
    long double total = static_cast<long double>(q) * (prefix[block] - prefix[1]);
    for (unsigned r = 1; r <= levels; ++r) {
        const uint64_t half = block << (r - 1);
        total += static_cast<long double>(q >> r) * merge_bits_with(half, half, prefix);
    }
    return static_cast<double>(total);
}

} // namespace shufflekit
