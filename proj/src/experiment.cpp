#include "onebit/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "onebit/csv.hpp"

namespace onebit {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string run_dir_name(long t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "run_%05ld", t);
    return buf;
}

double omega_at(const RunRecord& rec, long k) {
    const int D = rec.dim();
    if (k > rec.K - D) return kNaN;
    const int idx = selector(k, D) - 1;
    return rec.theta_hat_traj(k, idx) - rec.theta_rls_traj(k + D, idx);
}

std::string trajectory_csv(const RunRecord& rec) {
    const int D = rec.dim();
    std::string out;
    out.reserve(static_cast<std::size_t>(rec.K + 1) * (static_cast<std::size_t>(D) * 50 + 40));
    out += "k";
    for (int j = 1; j <= D; ++j) out += ",theta_hat_" + std::to_string(j);
    for (int j = 1; j <= D; ++j) out += ",theta_rls_" + std::to_string(j);
    out += ",s,omega\n";
    for (long k = 1; k <= rec.K; ++k) {
        out += std::to_string(k);
        for (int j = 0; j < D; ++j) out += "," + format_g17(rec.theta_hat_traj(k, j));
        for (int j = 0; j < D; ++j) out += "," + format_g17(rec.theta_rls_traj(k, j));
        out += rec.transcript[static_cast<std::size_t>(k - 1)] > 0 ? ",1," : ",-1,";
        out += format_g17(omega_at(rec, k));
        out += "\n";
    }
    return out;
}

std::string signals_csv(const RunRecord& rec) {
    std::string out = "k,u,d\n";
    out.reserve(static_cast<std::size_t>(rec.K + 1) * 50);
    for (long k = 0; k <= rec.K; ++k) {
        out += std::to_string(k);
        out += "," + format_g17(rec.signals.u(k));
        out += "," + format_g17(rec.signals.d(k));
        out += "\n";
    }
    return out;
}

std::string meta_text(const RunRecord& rec, std::uint64_t config_hash) {
    std::string out;
    out += "seed = " + std::to_string(rec.seed) + "\n";
    out += "config_hash = " + std::to_string(config_hash) + "\n";
    out += "K = " + std::to_string(rec.K) + "\n";
    out += "m = " + std::to_string(rec.m) + "\n";
    out += "n = " + std::to_string(rec.n) + "\n";
    return out;
}

void persist_run(const fs::path& dir, const RunRecord& rec, std::uint64_t config_hash) {
    fs::create_directories(dir);
    write_file(dir / "trajectory.csv", trajectory_csv(rec));
    write_file(dir / "signals.csv", signals_csv(rec));
    write_file(dir / "meta", meta_text(rec, config_hash));
    write_file(dir / "transcript.txt", transcript_to_ascii(rec.transcript));
    const auto packed = pack_transcript(rec.transcript);
    write_file(dir / "transcript.bin",
               std::string(reinterpret_cast<const char*>(packed.data()), packed.size()));
}

std::string mse_csv(const MseAggregate& agg) {
    std::string out = "k,k_mse_rls_sa,k_mse_rls,k_trace_crlb,tail_fraction,as_stat\n";
    for (std::size_t g = 0; g < agg.grid.size(); ++g) {
        const auto gi = static_cast<Eigen::Index>(g);
        out += std::to_string(agg.grid[g]);
        out += "," + format_g17(agg.k_mse(gi));
        out += "," + format_g17(agg.k_mse_rls(gi));
        out += "," + format_g17(agg.k_trace_crlb(gi));
        out += "," + format_g17(agg.tail_fraction(gi));
        out += "," + format_g17(agg.as_stat(gi));
        out += "\n";
    }
    return out;
}

std::string moments_csv(const MseAggregate& agg) {
    std::string out = "k,lp1,lp2,lp4\n";
    for (std::size_t g = 0; g < agg.grid.size(); ++g) {
        const auto gi = static_cast<Eigen::Index>(g);
        out += std::to_string(agg.grid[g]);
        out += "," + format_g17(agg.lp_moments(gi, 0));
        out += "," + format_g17(agg.lp_moments(gi, 1));
        out += "," + format_g17(agg.lp_moments(gi, 2));
        out += "\n";
    }
    return out;
}

/// Rows only where T >= 200 and the ensemble excitation estimate is PD;
/// whitening uses the ensemble k * Sigma_CR(k) at each grid point.
std::string normality_csv(const std::vector<RunSummary>& summaries,
                          const MseAggregate& agg, double delta_d) {
    const long T = static_cast<long>(summaries.size());
    const long D = summaries.empty() ? 0 : summaries.front().err_remote.cols();
    std::string out = "k,cov_dev_fro";
    for (long j = 1; j <= D; ++j) out += ",skew_" + std::to_string(j);
    for (long j = 1; j <= D; ++j) out += ",exkurt_" + std::to_string(j);
    out += "\n";
    if (T < 200) return out;

    for (std::size_t g = 0; g < agg.grid.size(); ++g) {
        const long k = agg.grid[g];
        Eigen::MatrixXd phi_mean = Eigen::MatrixXd::Zero(D, D);
        Eigen::MatrixXd errs(T, D);
        for (long t = 0; t < T; ++t) {
            const auto& s = summaries[static_cast<std::size_t>(t)];
            phi_mean += s.phi_sum[g];
            errs.row(t) = s.err_remote.row(static_cast<Eigen::Index>(g));
        }
        phi_mean /= static_cast<double>(T);
        try {
            const Eigen::MatrixXd sigma_bar_est =
                static_cast<double>(k) * sigma_cr_finite(phi_mean, delta_d);
            const NormalityStat stat = normality_stat(errs, k, sigma_bar_est);
            out += std::to_string(k);
            out += "," + format_g17(stat.cov_dev_fro);
            for (long j = 0; j < D; ++j) out += "," + format_g17(stat.skewness(j));
            for (long j = 0; j < D; ++j) out += "," + format_g17(stat.excess_kurtosis(j));
            out += "\n";
        } catch (const NotPositiveDefinite&) {
            // excitation not yet informative at this k
        }
    }
    return out;
}

struct WorkerFailure {
    long t = -1;
    std::string what;
};

std::vector<RunSummary> execute_runs(const ExperimentConfig& cfg, int parallel,
                                     bool save_runs, const fs::path& out_dir) {
    const long T = cfg.T;
    const std::uint64_t hash = cfg.hash();
    std::vector<RunSummary> summaries(static_cast<std::size_t>(T));
    std::atomic<long> next{0};
    std::mutex failure_mutex;
    std::vector<WorkerFailure> failures;

    auto worker = [&]() {
        for (;;) {
            const long t = next.fetch_add(1);
            if (t >= T) return;
            try {
                const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(t);
                const RunRecord rec =
                    run_rls_sa(cfg.system, cfg.input, cfg.schedule, cfg.theta_rls0,
                               cfg.P0(), cfg.theta_hat0, cfg.K, seed);
                summaries[static_cast<std::size_t>(t)] = summarize_run(rec, cfg.grid, hash);
                if (save_runs) persist_run(out_dir / "runs" / run_dir_name(t), rec, hash);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failures.push_back({t, e.what()});
            }
        }
    };

    const int threads = static_cast<int>(std::clamp<long>(parallel, 1L, T));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    if (!failures.empty()) {
        auto worst = std::min_element(failures.begin(), failures.end(),
                                      [](const auto& a, const auto& b) { return a.t < b.t; });
        throw Error("run " + std::to_string(worst->t) + " failed: " + worst->what);
    }
    return summaries;
}

void write_aggregate_files(const fs::path& out_dir,
                           const std::vector<RunSummary>& summaries,
                           const MseAggregate& agg, double delta_d) {
    write_file(out_dir / "mse.csv", mse_csv(agg));
    write_file(out_dir / "moments.csv", moments_csv(agg));
    write_file(out_dir / "normality.csv", normality_csv(summaries, agg, delta_d));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const RunExperimentOptions& options) {
    ExperimentConfig cfg = config;
    if (options.runs) cfg.T = *options.runs;
    if (options.seed) cfg.base_seed = *options.seed;
    if (options.out) cfg.out_dir = *options.out;
    if (cfg.T < 1) throw ValidationError("run_experiment: T must be >= 1");

    const fs::path out_dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir.string());
    write_file(out_dir / "config.resolved", cfg.resolved_text());

    const std::vector<RunSummary> summaries =
        execute_runs(cfg, options.parallel, options.save_runs, out_dir);
    const MseAggregate agg = aggregate(summaries, cfg.schedule, cfg.system.noise_std);
    write_aggregate_files(out_dir, summaries, agg, cfg.system.noise_std);
    return {agg, out_dir};
}

namespace {

std::map<std::string, std::string> read_meta(const fs::path& path) {
    std::map<std::string, std::string> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto first = s.find_first_not_of(" \t\r");
            if (first == std::string::npos) return std::string();
            const auto last = s.find_last_not_of(" \t\r");
            return s.substr(first, last - first + 1);
        };
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

}  // namespace

RunRecord load_run_record(const fs::path& run_dir, const ExperimentConfig& config) {
    const auto meta = read_meta(run_dir / "meta");
    const auto need = [&](const std::string& key) {
        const auto it = meta.find(key);
        if (it == meta.end()) throw IoError(run_dir.string() + "/meta: missing " + key);
        return it->second;
    };
    if (std::stoull(need("config_hash")) != config.hash()) {
        throw ConfigMismatch(run_dir.string() +
                             ": run was produced by a different configuration");
    }
    const long K = parse_long(need("K"));
    const int m = static_cast<int>(parse_long(need("m")));
    const int n = static_cast<int>(parse_long(need("n")));
    const int D = m + n;
    if (K != config.K || m != config.system.m || n != config.system.n) {
        throw ConfigMismatch(run_dir.string() + ": meta disagrees with config");
    }

    RunRecord rec;
    rec.seed = std::stoull(need("seed"));
    rec.m = m;
    rec.n = n;
    rec.K = K;
    rec.theta_true = config.system.theta();
    rec.schedule = config.schedule;

    // Signals: y is rebuilt from (u, d) with the exact simulate_with arithmetic,
    // so every downstream quantity reproduces bit-for-bit.
    {
        std::istringstream in(read_file(run_dir / "signals.csv"));
        std::string line;
        std::getline(in, line);  // header
        Eigen::VectorXd u(K + 1), d(K + 1);
        long rows = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto fields = split_csv_line(line);
            if (fields.size() != 3) throw ParseError(run_dir.string() + "/signals.csv: bad row");
            const long k = parse_long(fields[0]);
            if (k < 0 || k > K) throw ParseError(run_dir.string() + "/signals.csv: bad k");
            u(k) = parse_double(fields[1]);
            d(k) = parse_double(fields[2]);
            ++rows;
        }
        if (rows != K + 1) throw ParseError(run_dir.string() + "/signals.csv: wrong row count");
        rec.signals = simulate_with(config.system, u, d);
    }

    {
        std::istringstream in(read_file(run_dir / "trajectory.csv"));
        std::string line;
        std::getline(in, line);  // header
        rec.theta_hat_traj.resize(K + 1, D);
        rec.theta_rls_traj.resize(K + 1, D);
        rec.theta_hat_traj.row(0) = config.theta_hat0.transpose();
        rec.theta_rls_traj.row(0) = config.theta_rls0.transpose();
        rec.transcript.assign(static_cast<std::size_t>(K), -1);
        long rows = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto fields = split_csv_line(line);
            if (static_cast<int>(fields.size()) != 2 * D + 3) {
                throw ParseError(run_dir.string() + "/trajectory.csv: bad row");
            }
            const long k = parse_long(fields[0]);
            if (k < 1 || k > K) throw ParseError(run_dir.string() + "/trajectory.csv: bad k");
            for (int j = 0; j < D; ++j) {
                rec.theta_hat_traj(k, j) = parse_double(fields[static_cast<std::size_t>(1 + j)]);
                rec.theta_rls_traj(k, j) =
                    parse_double(fields[static_cast<std::size_t>(1 + D + j)]);
            }
            const long s = parse_long(fields[static_cast<std::size_t>(1 + 2 * D)]);
            if (s != 1 && s != -1) {
                throw ParseError(run_dir.string() + "/trajectory.csv: symbol not in {-1,1}");
            }
            rec.transcript[static_cast<std::size_t>(k - 1)] = static_cast<std::int8_t>(s);
            ++rows;
        }
        if (rows != K) throw ParseError(run_dir.string() + "/trajectory.csv: wrong row count");
    }
    return rec;
}

ExperimentResult diagnose(const fs::path& in_dir, int parallel) {
    const ExperimentConfig cfg = load_config((in_dir / "config.resolved").string());
    const fs::path runs_dir = in_dir / "runs";
    if (!fs::is_directory(runs_dir)) {
        throw IoError("no persisted runs under " + runs_dir.string() +
                      " (re-run with --save-runs)");
    }
    std::vector<fs::path> run_dirs;
    for (const auto& entry : fs::directory_iterator(runs_dir)) {
        if (entry.is_directory()) run_dirs.push_back(entry.path());
    }
    std::sort(run_dirs.begin(), run_dirs.end());
    if (run_dirs.empty()) throw IoError("no run directories under " + runs_dir.string());

    const long T = static_cast<long>(run_dirs.size());
    const std::uint64_t hash = cfg.hash();
    std::vector<RunSummary> summaries(static_cast<std::size_t>(T));
    std::atomic<long> next{0};
    std::mutex failure_mutex;
    std::vector<WorkerFailure> failures;

    auto worker = [&]() {
        for (;;) {
            const long t = next.fetch_add(1);
            if (t >= T) return;
            try {
                const RunRecord rec =
                    load_run_record(run_dirs[static_cast<std::size_t>(t)], cfg);
                summaries[static_cast<std::size_t>(t)] = summarize_run(rec, cfg.grid, hash);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failures.push_back({t, e.what()});
            }
        }
    };
    const int threads = static_cast<int>(std::clamp<long>(parallel, 1L, T));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (!failures.empty()) {
        auto worst = std::min_element(failures.begin(), failures.end(),
                                      [](const auto& a, const auto& b) { return a.t < b.t; });
        throw Error("run " + std::to_string(worst->t) + " failed: " + worst->what);
    }

    const MseAggregate agg = aggregate(summaries, cfg.schedule, cfg.system.noise_std);
    write_aggregate_files(in_dir, summaries, agg, cfg.system.noise_std);
    return {agg, in_dir};
}

CrlbResult crlb_of_config(const ExperimentConfig& config, long horizon, long burn_in) {
    if (horizon <= burn_in + 10) {
        throw InsufficientData("crlb_of_config: horizon must exceed burn_in");
    }
    const Trajectory traj = simulate(config.system, config.input, horizon, config.base_seed);
    const int tau_max = std::max(std::max(config.system.m, config.system.n) - 1, 0);
    const CovarianceFunctionSet covs = covariances(traj, tau_max, burn_in);
    return crlb(covs, config.system.noise_std, config.system.m, config.system.n);
}

}  // namespace onebit
