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

// Acceptance suite. Prints one PASS/FAIL line per criterion, with detail
// lines indented below it. Exit status is 0 when every failure is one of
// the documented unattainable cases listed in `kUnattainable` and in the
// README; any other failure exits 1.
//
// Usage: acceptance [criterion-key ...]   (default: all)

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <new>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "shufflekit/balanced.hpp"
#include "shufflekit/cli.hpp"
#include "shufflekit/shufflers.hpp"
#include "shufflekit/splitshuffle.hpp"
#include "shufflekit/verify.hpp"

// Allocation accounting for the in-place check. Every block carries a
// header with its size so live bytes can be tracked on release.
namespace alloc_stats {
std::atomic<bool> enabled{false};
std::atomic<int64_t> live{0};
std::atomic<int64_t> peak{0};
std::atomic<uint64_t> calls{0};

constexpr size_t kHeader = alignof(std::max_align_t);

void *acquire(size_t size) {
    auto *base = static_cast<unsigned char *>(std::malloc(size + kHeader));
    if (!base) throw std::bad_alloc();
    *reinterpret_cast<size_t *>(base) = size;
    if (enabled.load(std::memory_order_relaxed)) {
        calls.fetch_add(1, std::memory_order_relaxed);
        int64_t now = live.fetch_add(static_cast<int64_t>(size), std::memory_order_relaxed) + static_cast<int64_t>(size);
        int64_t seen = peak.load(std::memory_order_relaxed);
        while (now > seen && !peak.compare_exchange_weak(seen, now, std::memory_order_relaxed)) {
        }
    }
    return base + kHeader;
}

void release(void *p) noexcept {
    if (!p) return;
    auto *base = static_cast<unsigned char *>(p) - kHeader;
    if (enabled.load(std::memory_order_relaxed))
        live.fetch_sub(static_cast<int64_t>(*reinterpret_cast<size_t *>(base)), std::memory_order_relaxed);
    std::free(base);
}

void start() {
    live = 0;
    peak = 0;
    calls = 0;
    enabled = true;
}

void stop() { enabled = false; }
} // namespace alloc_stats

void *operator new(size_t size) { return alloc_stats::acquire(size); }
void *operator new[](size_t size) { return alloc_stats::acquire(size); }
void operator delete(void *p) noexcept { alloc_stats::release(p); }
void operator delete[](void *p) noexcept { alloc_stats::release(p); }
void operator delete(void *p, size_t) noexcept { alloc_stats::release(p); }
void operator delete[](void *p, size_t) noexcept { alloc_stats::release(p); }

using namespace shufflekit;

namespace {

struct Verdict {
    bool pass = true;
    // Failed, but only in ways documented as unattainable.
    bool documented = false;
    std::vector<std::string> details;
    std::vector<std::string> reasons;
};

ShuffleConfig config(size_t cutoff, unsigned threads = 1, size_t grain = kDefaultGrain) {
    ShuffleConfig cfg;
    cfg.cutoff = cutoff;
    cfg.threads = threads;
    cfg.grain = grain;
    return cfg;
}

std::string fmt(const char *pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<uint32_t> iota_vec(size_t n) {
    std::vector<uint32_t> v(n);
    std::iota(v.begin(), v.end(), 0U);
    return v;
}

// ---------------------------------------------------------------------------
// Execution-tree oracle cells

struct OracleCell {
    std::string label;
    ShuffleProcedure shuffle;
    unsigned n = 0;
    unsigned bit_cap = 40;
    bool resplits = false; ///< residual bound 2^-9 with slack instead of 2^-30
};

// Cells whose residual at cap 40 cannot fall below 2^-30: an exact uniform
// draw from a non-power-of-two range has a rejection tail, and these cells
// chain enough such draws that more than 2^-30 of the paths need over 40
// bits. They are still required to be uniform up to their residual.
const std::set<std::string> kUnattainable = {
    "fy n=5", "merge cutoff=1 n=4", "merge cutoff=1 n=5", "merge cutoff=2 n=5", "balanced cutoff=1 n=5",
    "merge-par cutoff=1 threads=2 n=4", "merge-par cutoff=1 threads=2 n=5", "merge-par cutoff=2 threads=2 n=5",
    "merge-par cutoff=1 threads=4 n=4", "merge-par cutoff=1 threads=4 n=5", "merge-par cutoff=2 threads=4 n=5",
};

DistributionTable run_cell(const OracleCell &cell, Verdict &v) {
    auto start = std::chrono::steady_clock::now();
    DistributionTable table = exact_distribution(cell.shuffle, cell.n, cell.bit_cap);
    const double secs = seconds_since(start);
    UniformityCheck strict = cell.resplits ? check_uniformity(table, 30, 9, true) : check_uniformity(table, 30, 30);
    // true masses lie in [mass, mass + residual]
    UniformityCheck within = check_uniformity(table, 30, 0, true);
    std::ostringstream line;
    line << cell.label << " cap=" << cell.bit_cap << " leaves=" << table.leaves << " outcomes=" << table.masses.size()
         << " residual=" << fmt("%.3g", strict.residual) << " max_dev=" << fmt("%.3g", strict.max_deviation)
         << " time=" << fmt("%.1fs", secs);
    const bool conserved = table.conserves_mass();
    if (strict.pass() && conserved) {
        line << " ok";
    } else if (conserved && within.masses_ok && kUnattainable.count(cell.label)) {
        line << " FAIL residual bound (documented; uniform up to residual)";
        v.documented = true;
        v.pass = false;
    } else {
        line << " FAIL";
        v.pass = false;
        v.reasons.push_back(cell.label + " is not uniform");
    }
    v.details.push_back(line.str());
    return table;
}

Verdict exact_uniformity() {
    Verdict v;
    for (unsigned n = 1; n <= 5; ++n) {
        const std::string suffix = " n=" + std::to_string(n);
        std::vector<OracleCell> cells{
            {"fy" + suffix, [](std::span<uint32_t> a, BitSource &s) { fisher_yates(a, s); }, n},
            {"merge cutoff=1" + suffix, [](std::span<uint32_t> a, BitSource &s) { merge_shuffle(a, config(1), s); }, n},
            {"merge cutoff=2" + suffix, [](std::span<uint32_t> a, BitSource &s) { merge_shuffle(a, config(2), s); }, n},
            {"rs cutoff=1" + suffix, [](std::span<uint32_t> a, BitSource &s) { rs_shuffle(a, config(1), s); }, n, 40, true},
            {"balanced cutoff=1" + suffix,
             [](std::span<uint32_t> a, BitSource &s) { balanced_shuffle(a, config(1), s); }, n},
        };
        for (const auto &cell : cells) run_cell(cell, v);
    }
    return v;
}

// ---------------------------------------------------------------------------
// Bit counts at scale

Verdict table_bit_counts() {
    Verdict v;
    struct Target {
        Algorithm algo;
        size_t n;
        double expected;
        bool upper_only;
    };
    const Target targets[] = {
        {Algorithm::fisher_yates, 100'000, 1'631'434, false}, {Algorithm::rao_sandelius, 100'000, 1'631'519, false},
        {Algorithm::merge, 100'000, 1'636'560, false},        {Algorithm::balanced, 100'000, 1'889'034, true},
        {Algorithm::fisher_yates, 1'000'000, 19'550'941, false}, {Algorithm::merge, 1'000'000, 19'686'051, false},
        {Algorithm::rao_sandelius, 1'000'000, 19'550'449, false},
    };
    for (const auto &t : targets) {
        BenchRow row = bench_cell(t.algo, t.n, 100, config(default_cutoff(t.algo)), 2026);
        const double rel = row.mean_bits / t.expected - 1.0;
        const bool ok = t.upper_only ? row.mean_bits <= t.expected * 1.05 : std::fabs(rel) <= 0.005;
        std::ostringstream line;
        line << row.algorithm << " n=" << t.n << " mean_bits=" << fmt("%.1f", row.mean_bits)
             << " target=" << fmt("%.0f", t.expected) << (t.upper_only ? " (upper, x1.05)" : " (+-0.5%)")
             << " rel=" << fmt("%+.4f", rel) << (ok ? " ok" : " FAIL");
        v.details.push_back(line.str());
        if (!ok) {
            v.pass = false;
            v.reasons.push_back(line.str());
        }
    }
    return v;
}

Verdict merge_bit_cost() {
    Verdict v;
    // (mean - n) / (sqrt(n) log2 n) must stay inside this band for every j
    const double band_low = 0.5, band_high = 0.9;
    const BitSource root(77);
    for (unsigned j = 6; j <= 14; ++j) {
        const size_t half = size_t{1} << j;
        const double n = 2.0 * static_cast<double>(half);
        std::vector<uint32_t> arr(2 * half);
        double sum = 0.0;
        for (uint64_t t = 0; t < 1000; ++t) {
            std::iota(arr.begin(), arr.end(), 0U);
            BitSource src = root.split_substream(j * 1000 + t);
            merge(std::span<uint32_t>(arr), MergeRange{0, half, half}, src);
            sum += static_cast<double>(src.bits_consumed());
        }
        const double mean = sum / 1000.0;
        const double model = expected_merge_bits(half, half, fdr_cost());
        const double rel = mean / model - 1.0;
        const double excess = (mean - n) / (std::sqrt(n) * std::log2(n));
        const bool ok = std::fabs(rel) <= 0.02 && excess >= band_low && excess <= band_high;
        std::ostringstream line;
        line << "n1=n2=2^" << j << " mean=" << fmt("%.1f", mean) << " model=" << fmt("%.1f", model)
             << " rel=" << fmt("%+.4f", rel) << " normalized_excess=" << fmt("%.4f", excess) << (ok ? " ok" : " FAIL");
        v.details.push_back(line.str());
        if (!ok) {
            v.pass = false;
            v.reasons.push_back(line.str());
        }
    }
    return v;
}

Verdict total_cost_fit() {
    Verdict v;
    for (size_t cutoff : {kDefaultCutoff, size_t{1}}) {
        std::vector<double> sizes, means;
        const BitSource root(99);
        for (unsigned e = 10; e <= 20; ++e) {
            const size_t n = size_t{1} << e;
            const uint64_t trials = e <= 16 ? 50 : 10;
            std::vector<uint32_t> arr(n);
            double sum = 0.0;
            for (uint64_t t = 0; t < trials; ++t) {
                std::iota(arr.begin(), arr.end(), 0U);
                BitSource src = root.split_substream(e * 100 + t);
                sum += static_cast<double>(merge_shuffle(std::span<uint32_t>(arr), config(cutoff), src).bits);
            }
            sizes.push_back(static_cast<double>(n));
            means.push_back(sum / static_cast<double>(trials));
        }
        // least squares for a in mean = n log2 n + a n
        double num = 0.0, den = 0.0;
        for (size_t i = 0; i < sizes.size(); ++i) {
            num += sizes[i] * (means[i] - sizes[i] * std::log2(sizes[i]));
            den += sizes[i] * sizes[i];
        }
        const double a = num / den;
        double worst = 0.0;
        for (size_t i = 0; i < sizes.size(); ++i) {
            const double fit = sizes[i] * std::log2(sizes[i]) + a * sizes[i];
            worst = std::max(worst, std::fabs(means[i] - fit) / means[i]);
        }
        std::ostringstream line;
        line << "cutoff=" << cutoff << " a=" << fmt("%.4f", a) << " max_relative_residual=" << fmt("%.4f", worst);
        if (cutoff != kDefaultCutoff) {
            // unit blocks: a(n) is still drifting at these sizes
            line << " (informational)";
            v.details.push_back(line.str());
            continue;
        }
        const bool ok = worst < 0.02;
        line << (ok ? " ok" : " FAIL");
        v.details.push_back(line.str());
        if (!ok) {
            v.pass = false;
            v.reasons.push_back(line.str());
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Chi-square at n = 6

struct ChiCase {
    std::string label;
    ShuffleProcedure shuffle;
};

std::vector<ChiCase> chi_cases(const std::vector<unsigned> &thread_counts, bool sequential) {
    std::vector<ChiCase> cases;
    if (sequential) {
        cases.push_back({"fy", [](std::span<uint32_t> a, BitSource &s) { fisher_yates(a, s); }});
        cases.push_back({"merge cutoff=1", [](std::span<uint32_t> a, BitSource &s) { merge_shuffle(a, config(1), s); }});
        cases.push_back({"rs cutoff=1", [](std::span<uint32_t> a, BitSource &s) { rs_shuffle(a, config(1), s); }});
        cases.push_back(
            {"balanced cutoff=1", [](std::span<uint32_t> a, BitSource &s) { balanced_shuffle(a, config(1), s); }});
    }
    for (unsigned threads : thread_counts) {
        const std::string t = " threads=" + std::to_string(threads);
        cases.push_back({"merge-par cutoff=1" + t, [threads](std::span<uint32_t> a, BitSource &s) {
                             merge_shuffle_parallel(a, config(1, threads, 1), s);
                         }});
        cases.push_back({"rs-par cutoff=1" + t, [threads](std::span<uint32_t> a, BitSource &s) {
                             rs_shuffle_parallel(a, config(1, threads, 1), s);
                         }});
    }
    return cases;
}

void run_chi(const std::vector<ChiCase> &cases, Verdict &v) {
    uint64_t seed = 6000;
    for (const auto &c : cases) {
        auto start = std::chrono::steady_clock::now();
        ChiSquareResult r = chi_square_uniformity(c.shuffle, 6, 1'000'000, seed++);
        std::ostringstream line;
        line << c.label << " statistic=" << fmt("%.1f", r.statistic) << " dof=" << r.dof
             << " threshold=" << fmt("%.1f", r.threshold) << " time=" << fmt("%.1fs", seconds_since(start))
             << (r.pass ? " ok" : " FAIL");
        v.details.push_back(line.str());
        if (!r.pass) {
            v.pass = false;
            v.reasons.push_back(line.str());
        }
    }
}

Verdict chi_square_scale() {
    Verdict v;
    run_chi(chi_cases({4}, true), v);
    return v;
}

// ---------------------------------------------------------------------------
// Parallel correctness

bool tables_equal(const DistributionTable &a, const DistributionTable &b) {
    return a.masses == b.masses && a.residual == b.residual && a.leaves == b.leaves;
}

Verdict parallel_correctness() {
    Verdict v;
    auto merge_par = [](size_t cutoff, unsigned threads) {
        return [=](std::span<uint32_t> a, BitSource &s) { merge_shuffle_parallel(a, config(cutoff, threads, 1), s); };
    };
    auto rs_par = [](unsigned threads) {
        return [=](std::span<uint32_t> a, BitSource &s) { rs_shuffle_parallel(a, config(1, threads, 1), s); };
    };

    for (size_t cutoff : {size_t{1}, size_t{2}}) {
        for (unsigned n = 1; n <= 5; ++n) {
            DistributionTable base = exact_distribution(merge_par(cutoff, 1), n, 40);
            for (unsigned threads : {2U, 4U}) {
                OracleCell cell{"merge-par cutoff=" + std::to_string(cutoff) + " threads=" + std::to_string(threads) +
                                    " n=" + std::to_string(n),
                                merge_par(cutoff, threads), n};
                DistributionTable t = run_cell(cell, v);
                if (!tables_equal(t, base)) {
                    v.pass = false;
                    v.reasons.push_back(cell.label + " differs from threads=1");
                }
            }
        }
    }
    // Rao-Sandelius resplits make the tree much bushier than the merge
    // trees; enumeration is limited to what a single core finishes.
    for (unsigned n = 1; n <= 3; ++n) {
        const unsigned cap = n <= 2 ? 40 : 30;
        DistributionTable base = exact_distribution(rs_par(1), n, cap);
        for (unsigned threads : {2U, 4U}) {
            OracleCell cell{"rs-par cutoff=1 threads=" + std::to_string(threads) + " n=" + std::to_string(n),
                            rs_par(threads), n, cap, true};
            DistributionTable t = run_cell(cell, v);
            if (!tables_equal(t, base)) {
                v.pass = false;
                v.reasons.push_back(cell.label + " differs from threads=1");
            }
        }
    }
    v.details.push_back("rs-par n=3 enumerated at cap 30; n=4,5 not enumerated (documented: about 1e8 and 1e9 runs)");
    v.documented = true;
    v.pass = false;

    run_chi(chi_cases({2, 4}, false), v);

    // frozen schedules
    for (unsigned threads : {1U, 2U, 4U}) {
        auto arr = iota_vec(16);
        BitSource src(7);
        ShuffleReport rep = merge_shuffle_parallel(std::span<uint32_t>(arr), config(4, threads, 1), src);
        const bool ok = arr == std::vector<uint32_t>{2, 6, 5, 10, 1, 12, 15, 4, 7, 8, 14, 0, 9, 11, 3, 13} &&
                        rep.bits == 67;
        v.details.push_back("merge fixture seed=7 n=16 cutoff=4 threads=" + std::to_string(threads) +
                            (ok ? " ok" : " FAIL"));
        if (!ok) {
            v.pass = false;
            v.reasons.push_back("merge fixture differs at threads=" + std::to_string(threads));
        }

        auto small = iota_vec(5);
        BitSource rs_src(1);
        ShuffleReport rs_rep = rs_shuffle_parallel(std::span<uint32_t>(small), config(1, threads, 1), rs_src);
        const bool rs_ok = small == std::vector<uint32_t>{3, 0, 1, 4, 2} && rs_rep.bits == 14;
        v.details.push_back("rs fixture seed=1 n=5 cutoff=1 threads=" + std::to_string(threads) +
                            (rs_ok ? " ok" : " FAIL"));
        if (!rs_ok) {
            v.pass = false;
            v.reasons.push_back("rs fixture differs at threads=" + std::to_string(threads));
        }
    }
    // threads do not change large outputs either
    for (Algorithm algo : {Algorithm::merge, Algorithm::rao_sandelius}) {
        std::vector<uint32_t> reference;
        uint64_t reference_bits = 0;
        for (unsigned threads : {1U, 2U, 4U}) {
            auto arr = iota_vec(200'000);
            BitSource src(31);
            ShuffleReport rep = run_algorithm(algo, std::span<uint32_t>(arr), config(1024, threads, 4096), src);
            if (threads == 1) {
                reference = arr;
                reference_bits = rep.bits;
            } else if (arr != reference || rep.bits != reference_bits) {
                v.pass = false;
                v.reasons.push_back(std::string(algorithm_name(algo)) + " n=200000 differs at threads=" +
                                    std::to_string(threads));
            }
        }
        v.details.push_back(std::string(algorithm_name(algo)) +
                            " n=200000 cutoff=1024: identical output and bits for threads 1, 2, 4");
    }
    return v;
}

// ---------------------------------------------------------------------------
// In-place property

Verdict in_place() {
    Verdict v;
    for (size_t cutoff : {kDefaultCutoff, size_t{1}}) {
        for (size_t n : {size_t{1'000}, size_t{100'000}, size_t{10'000'000}}) {
            auto arr = iota_vec(n);
            BitSource src(5);
            alloc_stats::start();
            merge_shuffle(std::span<uint32_t>(arr), config(cutoff), src);
            alloc_stats::stop();
            const int64_t peak = alloc_stats::peak.load();
            // O(log n): a few words per merge level at most
            const double bound = 64.0 * (std::log2(static_cast<double>(n)) + 1.0);
            const bool ok = static_cast<double>(peak) <= bound;
            std::ostringstream line;
            line << "merge_shuffle cutoff=" << cutoff << " n=" << n << " peak_aux_bytes=" << peak
                 << " allocations=" << alloc_stats::calls.load() << " bound=" << fmt("%.0f", bound)
                 << (ok ? " ok" : " FAIL");
            v.details.push_back(line.str());
            if (!ok) {
                v.pass = false;
                v.reasons.push_back(line.str());
            }
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Timing (never gates)

void timing_report() {
    const size_t n = 10'000'000;
    std::ofstream csv("acceptance_timing.csv");
    csv << "algorithm,n,threads,wall_ns,bits\n";
    double sequential = 0.0;
    for (unsigned threads : {1U, 2U, 4U}) {
        auto arr = iota_vec(n);
        BitSource src(3);
        ShuffleReport rep = merge_shuffle_parallel(std::span<uint32_t>(arr), config(kDefaultCutoff, threads), src);
        csv << "merge," << n << ',' << threads << ',' << rep.wall_ns << ',' << rep.bits << '\n';
        if (threads == 1) sequential = static_cast<double>(rep.wall_ns);
        std::printf("INFO timing merge n=%zu threads=%u wall=%.3fs speedup=%.2f (non-gating)\n", n, threads,
                    static_cast<double>(rep.wall_ns) / 1e9, sequential / static_cast<double>(rep.wall_ns));
    }
    std::printf("INFO timing written to acceptance_timing.csv (hardware threads: %u)\n",
                std::thread::hardware_concurrency());
}

} // namespace

int main(int argc, char **argv) {
    struct Entry {
        const char *key;
        const char *title;
        std::function<Verdict()> run;
    };
    const std::vector<Entry> entries{
        {"exact", "exact uniformity on the execution tree, n=1..5, cap 40", exact_uniformity},
        {"bits", "mean bit counts at n=1e5 and 1e6 against reference values", table_bit_counts},
        {"merge-cost", "in-place merge bit cost against the exact-FDR model", merge_bit_cost},
        {"total-cost", "MergeShuffle total bits fit n log2 n + a n", total_cost_fit},
        {"chisq", "chi-square uniformity at n=6 over 1e6 trials", chi_square_scale},
        {"parallel", "parallel MergeShuffle and Rao-Sandelius correctness", parallel_correctness},
        {"in-place", "MergeShuffle auxiliary memory is O(log n)", in_place},
    };
    std::set<std::string> wanted(argv + 1, argv + argc);
    bool unexpected = false;
    for (const auto &e : entries) {
        if (!wanted.empty() && !wanted.count(e.key)) continue;
        auto start = std::chrono::steady_clock::now();
        Verdict v = e.run();
        const bool documented_only = !v.pass && v.documented && v.reasons.empty();
        if (!v.pass && !documented_only) unexpected = true;
        std::printf("%s %s: %s (%.1fs)%s\n", v.pass ? "PASS" : "FAIL", e.key, e.title, seconds_since(start),
                    documented_only ? " [documented unattainable part; see README]" : "");
        for (const auto &d : v.details) std::printf("    %s\n", d.c_str());
        for (const auto &r : v.reasons) std::printf("    reason: %s\n", r.c_str());
        std::fflush(stdout);
    }
    if (wanted.empty() || wanted.count("timing")) timing_report();
    return unexpected ? 1 : 0;
}
