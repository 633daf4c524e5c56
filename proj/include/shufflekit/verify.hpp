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

#ifndef SHUFFLEKIT_VERIFY_HPP
#define SHUFFLEKIT_VERIFY_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "shufflekit/bitstream.hpp"

namespace shufflekit {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

uint64_t factorial(unsigned n);

/// Rank of a permutation of 0..n-1 in [0, n!): factorial-base digits, the
/// digit of weight k! being the number of smaller values to the right of
/// position n-1-k. The identity has rank 0.
uint64_t lehmer_rank(std::span<const uint32_t> perm);
std::vector<uint32_t> lehmer_unrank(uint64_t rank, unsigned n);

/// numerator / 2^exponent.
struct Dyadic {
    BigInt numerator = 0;
    unsigned exponent = 0;

    Dyadic normalized() const;
    double to_double() const;
    bool operator==(const Dyadic &other) const;
};

/// Output distribution of a shuffle found by exhaustive enumeration of its
/// random bits. Paths needing more than bit_cap bits go to the residual.
struct DistributionTable {
    unsigned n = 0;
    unsigned bit_cap = 0;
    std::map<uint64_t, Dyadic> masses;
    Dyadic residual;
    uint64_t leaves = 0;

    Dyadic mass(uint64_t rank) const;
    /// Sum of masses plus residual is exactly one.
    bool conserves_mass() const;
    /// rank,mass_numerator,mass_exponent rows followed by a residual row.
    void write_csv(std::ostream &out) const;
};

using ShuffleProcedure = std::function<void(std::span<uint32_t>, BitSource &)>;

/// Runs `shuffle` on 0..n-1 once per leaf of its bit tree. Each run gets a
/// source whose bits (and those of every substream split from it) come
/// from a per-stream prefix; a request past the prefix aborts the run and
/// the prefix is extended both ways. Works for parallel procedures as long
/// as their output is a function of their streams' bits.
DistributionTable exact_distribution(const ShuffleProcedure &shuffle, unsigned n, unsigned bit_cap);

struct UniformityCheck {
    bool masses_ok = false;
    bool residual_ok = false;
    double max_deviation = 0.0; ///< max |mass - 1/n!|
    double residual = 0.0;

    bool pass() const { return masses_ok && residual_ok; }
};

/// Certifies every one of the n! masses lies within 2^-tolerance_exp of
/// 1/n! and that residual < 2^-residual_exp. With residual_slack the lower
/// side is widened by the residual, i.e. the true mass (somewhere in
/// [mass, mass + residual]) must be compatible with 1/n!.
UniformityCheck check_uniformity(const DistributionTable &table, unsigned tolerance_exp = 30,
                                 unsigned residual_exp = 30, bool residual_slack = false);

struct ChiSquareResult {
    double statistic = 0.0;
    uint64_t dof = 0;
    double threshold = 0.0;
    bool pass = false;
    std::vector<uint64_t> counts;
};

/// Pearson statistic of counts against the uniform law on their bins.
double chi_square_statistic(std::span<const uint64_t> counts);
double chi_square_quantile(uint64_t dof, double level);
ChiSquareResult chi_square_from_counts(std::vector<uint64_t> counts, double level = 0.999);

/// Bins `trials` outputs of `shuffle` on 0..n-1 by Lehmer rank. Trial t
/// draws from BitSource(seed).split_substream(t). Requires trials >= 10 n!.
ChiSquareResult chi_square_uniformity(const ShuffleProcedure &shuffle, unsigned n, uint64_t trials, uint64_t seed,
                                      double level = 0.999);

/// Expected bits of one uniform draw in [0, k).
struct CostModel {
    std::string name;
    std::function<double(uint64_t)> per_draw_cost;
};

/// ceil(log2 k) bits per draw.
CostModel ceil_log2_cost();
/// Exact expectation of the Fast Dice Roller.
CostModel fdr_cost();

/// Expected bits of merge() on sizes n1, n2: the two negative-binomial sums
/// over the phase-one stopping point, plus the draws of phase two. Zero if
/// either side is empty.
double expected_merge_bits(uint64_t n1, uint64_t n2, const CostModel &model);

/// Same quantity under ceil(log2 k) costs, as an exact rational computed
/// with big binomial coefficients.
BigRational expected_merge_bits_exact(uint64_t n1, uint64_t n2);

/// Expected merge bits with the phase-two sum over k in [m, n] replaced by
/// log2(m)(n-m+1) (lower) and log2(n)(n-m+1) (upper).
struct MergeBitBounds {
    double lower = 0.0;
    double upper = 0.0;
};
MergeBitBounds merge_bits_bounds(uint64_t n1, uint64_t n2);

double expected_fisher_yates_bits(uint64_t n, const CostModel &model);

/// Expected bits of merge_shuffle for n a power of two: Fisher-Yates on the
/// leaf blocks plus the merge rounds.
double expected_total_bits(uint64_t n, uint64_t cutoff, const CostModel &model);

} // namespace shufflekit

#endif // SHUFFLEKIT_VERIFY_HPP
