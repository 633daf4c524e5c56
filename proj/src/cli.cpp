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

#include "shufflekit/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "shufflekit/verify.hpp"

namespace shufflekit {

std::optional<Algorithm> parse_algorithm(std::string_view name) {
    if (name == "fy") return Algorithm::fisher_yates;
    if (name == "merge") return Algorithm::merge;
    if (name == "rs") return Algorithm::rao_sandelius;
    if (name == "balanced") return Algorithm::balanced;
    return std::nullopt;
}

std::string_view algorithm_name(Algorithm algo) {
    switch (algo) {
    case Algorithm::fisher_yates: return "fy";
    case Algorithm::merge: return "merge";
    case Algorithm::rao_sandelius: return "rs";
    case Algorithm::balanced: return "balanced";
    }
    return "?";
}

size_t default_cutoff(Algorithm algo) { return algo == Algorithm::balanced ? 1 : kDefaultCutoff; }

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

bool is_identity_permutation(std::span<const uint32_t> arr, std::vector<uint8_t> &seen) {
    seen.assign(arr.size(), 0);
    for (uint32_t v : arr) {
        if (v >= arr.size() || seen[v]) return false;
        seen[v] = 1;
    }
    return true;
}

} // namespace

BenchRow bench_cell(Algorithm algo, size_t n, uint64_t trials, const ShuffleConfig &cfg, uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("trials must be at least 1");
    if (n > UINT32_MAX) throw std::invalid_argument("size exceeds 2^32");
    std::vector<uint32_t> arr(n);
    std::vector<uint8_t> seen;
    const BitSource root(seed);
    double sum = 0.0;
    double sum_sq = 0.0;
    double wall = 0.0;
    for (uint64_t t = 0; t < trials; ++t) {
        std::iota(arr.begin(), arr.end(), 0U);
        BitSource src = root.split_substream(t);
        ShuffleReport rep = run_algorithm(algo, std::span<uint32_t>(arr), cfg, src);
        if (!is_identity_permutation(arr, seen)) throw std::runtime_error("output is not a permutation");
        const double bits = static_cast<double>(rep.bits);
        sum += bits;
        sum_sq += bits * bits;
        wall += static_cast<double>(rep.wall_ns);
    }
    BenchRow row;
    row.algorithm = std::string(algorithm_name(algo));
    row.n = n;
    row.trials = trials;
    const double k = static_cast<double>(trials);
    row.mean_bits = sum / k;
    row.stddev_bits = trials > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / k) / (k - 1))) : 0.0;
    row.mean_wall_ns = wall / k;
    row.threads = algo == Algorithm::merge || algo == Algorithm::rao_sandelius ? cfg.threads : 1;
    row.seed = seed;
    return row;
}

std::string format_bench_row(const BenchRow &row) {
    return row.algorithm + ',' + std::to_string(row.n) + ',' + std::to_string(row.trials) + ',' +
           fixed(row.mean_bits, 2) + ',' + fixed(row.stddev_bits, 2) + ',' + fixed(row.mean_wall_ns, 0) + ',' +
           std::to_string(row.threads) + ',' + std::to_string(row.seed);
}

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

unsigned default_threads() {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

uint64_t resolve_seed(const std::optional<uint64_t> &flag) {
    if (flag) return *flag;
    if (const char *env = std::getenv("SHUFFLEKIT_SEED")) {
        try {
            size_t used = 0;
            uint64_t v = std::stoull(env, &used, 0);
            if (used == std::string_view(env).size()) return v;
        } catch (const std::exception &) {
        }
        throw UsageError(std::string("SHUFFLEKIT_SEED is not an integer: ") + env);
    }
    std::random_device rd;
    return (static_cast<uint64_t>(rd()) << 32) | rd();
}

Algorithm require_algorithm(const std::string &name) {
    auto algo = parse_algorithm(name);
    if (!algo) throw UsageError("unknown algorithm '" + name + "' (expected fy, merge, rs or balanced)");
    return *algo;
}

struct CommonOptions {
    std::optional<uint64_t> seed;
    unsigned threads = default_threads();
    std::optional<size_t> cutoff;

    void add_to(CLI::App *cmd) {
        cmd->add_option("--seed", seed, "random seed (default: $SHUFFLEKIT_SEED, else nondeterministic)");
        cmd->add_option("--threads", threads, "worker threads for merge and rs")->check(CLI::PositiveNumber);
        cmd->add_option("--cutoff", cutoff, "Fisher-Yates block size threshold")->check(CLI::PositiveNumber);
    }

    ShuffleConfig config(Algorithm algo, uint64_t resolved_seed) const {
        ShuffleConfig cfg;
        cfg.cutoff = cutoff.value_or(default_cutoff(algo));
        cfg.threads = threads;
        cfg.seed = resolved_seed;
        return cfg;
    }
};

struct ShuffleArgs {
    std::string algo;
    std::optional<size_t> n;
    bool report = false;
    CommonOptions common;
};

int cmd_shuffle(const ShuffleArgs &args, std::istream &in, std::ostream &out, std::ostream &err) {
    const Algorithm algo = require_algorithm(args.algo);
    const uint64_t seed = resolve_seed(args.common.seed);
    const ShuffleConfig cfg = args.common.config(algo, seed);
    BitSource src(seed);
    ShuffleReport rep;
    if (args.n) {
        if (*args.n > UINT32_MAX) throw UsageError("--n exceeds 2^32");
        std::vector<uint32_t> arr(*args.n);
        std::iota(arr.begin(), arr.end(), 0U);
        rep = run_algorithm(algo, std::span<uint32_t>(arr), cfg, src);
        std::string buf;
        for (uint32_t v : arr) {
            buf += std::to_string(v);
            buf += '\n';
        }
        out << buf;
    } else {
        std::vector<std::string> lines;
        for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
        rep = run_algorithm(algo, std::span<std::string>(lines), cfg, src);
        for (const auto &line : lines) out << line << '\n';
    }
    if (args.report)
        err << "algorithm=" << algorithm_name(algo) << " n=" << rep.n << " bits=" << rep.bits
            << " wall_ns=" << rep.wall_ns << " threads=" << rep.threads << " seed=" << seed << '\n';
    return kExitOk;
}

struct BenchArgs {
    std::vector<std::string> algos;
    std::vector<std::string> sizes;
    uint64_t trials = 100;
    std::string csv;
    std::string plot_data;
    CommonOptions common;
};

int cmd_bench(const BenchArgs &args, std::ostream &out, std::ostream &err) {
    if (args.algos.empty()) throw UsageError("--algos is empty");
    if (args.sizes.empty()) throw UsageError("--sizes is empty");
    if (args.trials < 1) throw UsageError("--trials must be at least 1");
    std::vector<Algorithm> algos;
    for (const auto &name : args.algos) algos.push_back(require_algorithm(name));
    std::vector<size_t> sizes;
    for (const auto &text : args.sizes) {
        size_t n = 0;
        auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
        if (text.empty() || ec != std::errc() || end != text.data() + text.size())
            throw UsageError("--sizes entry '" + text + "' is not a size");
        sizes.push_back(n);
    }
    const uint64_t seed = resolve_seed(args.common.seed);

    std::vector<BenchRow> rows;
    for (Algorithm algo : algos) {
        for (size_t n : sizes) {
            try {
                rows.push_back(bench_cell(algo, n, args.trials, args.common.config(algo, seed), seed));
            } catch (const std::exception &e) {
                err << "bench: cell algorithm=" << algorithm_name(algo) << " n=" << n << " failed: " << e.what()
                    << '\n';
                return kExitFail;
            }
        }
    }

    std::string csv(kBenchHeader);
    csv += '\n';
    for (const auto &row : rows) csv += format_bench_row(row) + '\n';
    out << csv;
    if (!args.csv.empty()) {
        std::ofstream f(args.csv);
        if (!f) throw UsageError("cannot write " + args.csv);
        f << csv;
    }
    if (!args.plot_data.empty()) {
        std::ofstream f(args.plot_data);
        if (!f) throw UsageError("cannot write " + args.plot_data);
        f << "algorithm,n,threads,metric,value\n";
        for (const auto &row : rows) {
            const std::string key = row.algorithm + ',' + std::to_string(row.n) + ',' + std::to_string(row.threads) + ',';
            f << key << "mean_bits," << fixed(row.mean_bits, 2) << '\n';
            f << key << "stddev_bits," << fixed(row.stddev_bits, 2) << '\n';
            f << key << "bits_per_element," << fixed(row.n ? row.mean_bits / static_cast<double>(row.n) : 0.0, 6)
              << '\n';
            f << key << "mean_wall_ns," << fixed(row.mean_wall_ns, 0) << '\n';
        }
    }
    return kExitOk;
}

struct VerifyArgs {
    std::string mode;
    std::string algo;
    unsigned n = 0;
    uint64_t trials = 1'000'000;
    unsigned bit_cap = 40;
    std::string csv;
    CommonOptions common;
};

int cmd_verify(const VerifyArgs &args, std::ostream &out) {
    const Algorithm algo = require_algorithm(args.algo);
    if (args.mode != "exact" && args.mode != "chisq") throw UsageError("--mode must be exact or chisq");
    const uint64_t seed = resolve_seed(args.common.seed);
    ShuffleConfig cfg = args.common.config(algo, seed);
    // Verification targets the recursive structure: small leaves unless
    // asked otherwise, and every fork taken.
    if (!args.common.cutoff) cfg.cutoff = 1;
    cfg.grain = 1;
    const ShuffleProcedure proc = [algo, cfg](std::span<uint32_t> arr, BitSource &src) {
        run_algorithm(algo, arr, cfg, src);
    };

    bool pass = false;
    if (args.mode == "exact") {
        if (args.n > 6) throw UsageError("exact mode supports n <= 6");
        if (args.bit_cap < 1 || args.bit_cap > 62) throw UsageError("--bit-cap must lie in [1, 62]");
        DistributionTable table = exact_distribution(proc, args.n, args.bit_cap);
        const bool rs = algo == Algorithm::rao_sandelius;
        UniformityCheck check = check_uniformity(table, 30, rs ? 9 : 30, rs);
        out << "mode=exact algorithm=" << algorithm_name(algo) << " n=" << args.n << " cutoff=" << cfg.cutoff
            << " threads=" << cfg.threads << " bit_cap=" << args.bit_cap << '\n';
        out << "leaves=" << table.leaves << " outcomes=" << table.masses.size() << " of " << factorial(args.n)
            << " max_deviation=" << check.max_deviation << " residual=" << check.residual << '\n';
        if (!args.csv.empty()) {
            std::ofstream f(args.csv);
            if (!f) throw UsageError("cannot write " + args.csv);
            table.write_csv(f);
        }
        pass = check.pass() && table.conserves_mass();
    } else {
        if (args.n < 2 || args.n > 10) throw UsageError("chisq mode supports 2 <= n <= 10");
        if (args.trials < 10 * factorial(args.n)) throw UsageError("--trials must be at least 10 n!");
        ChiSquareResult res = chi_square_uniformity(proc, args.n, args.trials, seed);
        out << "mode=chisq algorithm=" << algorithm_name(algo) << " n=" << args.n << " trials=" << args.trials
            << " seed=" << seed << " threads=" << cfg.threads << '\n';
        out << "statistic=" << fixed(res.statistic, 3) << " dof=" << res.dof << " threshold(0.999)="
            << fixed(res.threshold, 3) << '\n';
        pass = res.pass;
    }
    out << "VERDICT " << (pass ? "pass" : "fail") << '\n';
    return pass ? kExitOk : kExitFail;
}

} // namespace

int run_cli(int argc, const char *const *argv, std::istream &in, std::ostream &out, std::ostream &err) {
    CLI::App app{"Random permutations with exact random-bit accounting", "shufflekit"};
    app.require_subcommand(1);

    ShuffleArgs shuffle_args;
    auto *shuffle = app.add_subcommand("shuffle", "shuffle 0..n-1, or lines of standard input");
    shuffle->add_option("--algo", shuffle_args.algo, "fy, merge, rs or balanced")->required();
    shuffle->add_option("--n", shuffle_args.n, "shuffle 0..n-1 instead of reading standard input");
    shuffle->add_flag("--report", shuffle_args.report, "print bits consumed to standard error");
    shuffle_args.common.add_to(shuffle);

    BenchArgs bench_args;
    auto *bench = app.add_subcommand("bench", "mean random bits and wall time per algorithm and size");
    bench->add_option("--algos", bench_args.algos, "comma-separated algorithms")->delimiter(',')->required();
    bench->add_option("--sizes", bench_args.sizes, "comma-separated sizes")->delimiter(',')->required();
    bench->add_option("--trials", bench_args.trials, "trials per cell");
    bench->add_option("--csv", bench_args.csv, "also write the CSV to this file");
    bench->add_option("--plot-data", bench_args.plot_data, "write long-format plot data to this file");
    bench_args.common.add_to(bench);

    VerifyArgs verify_args;
    auto *verify = app.add_subcommand("verify", "check uniformity exactly or by chi-square");
    verify->add_option("--mode", verify_args.mode, "exact or chisq")->required();
    verify->add_option("--algo", verify_args.algo, "fy, merge, rs or balanced")->required();
    verify->add_option("--n", verify_args.n, "permutation size")->required();
    verify->add_option("--trials", verify_args.trials, "chisq trials");
    verify->add_option("--bit-cap", verify_args.bit_cap, "exact mode: maximum bits per path");
    verify->add_option("--csv", verify_args.csv, "exact mode: write the distribution table here");
    verify_args.common.threads = 1;
    verify_args.common.add_to(verify);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (*shuffle) return cmd_shuffle(shuffle_args, in, out, err);
        if (*bench) return cmd_bench(bench_args, out, err);
        if (*verify) return cmd_verify(verify_args, out);
    } catch (const UsageError &e) {
        err << "error: " << e.what() << '\n';
        err << app.help();
        return kExitUsage;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return kExitFail;
    }
    return kExitUsage;
}

} // namespace shufflekit
