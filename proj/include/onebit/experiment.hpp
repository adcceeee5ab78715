#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "onebit/analysis.hpp"
#include "onebit/config.hpp"

namespace onebit {

struct RunExperimentOptions {
    std::optional<long> runs;           // override config T
    std::optional<std::uint64_t> seed;  // override config base_seed
    std::optional<std::string> out;     // override config out_dir
    int parallel = 1;
    bool save_runs = false;
};

struct ExperimentResult {
    MseAggregate agg;
    std::filesystem::path out_dir;
};

/// Executes T seeded runs (seed = base + t), aggregates on the grid in seed
/// order, and persists:
///   config.resolved   canonical config echo (loadable as a config file)
///   mse.csv           k, k_mse_rls_sa, k_mse_rls, k_trace_crlb, tail_fraction, as_stat
///   moments.csv       k, lp1, lp2, lp4
///   normality.csv     k, cov_dev_fro, skew_1..D, exkurt_1..D (rows only
///                     where T >= 200 and the ensemble excitation is PD)
/// and with save_runs, per-run directories runs/run_%05d containing
/// trajectory.csv, signals.csv, transcript.txt, transcript.bin and meta.
/// Identical config+seed give bit-identical bytes for any parallel value.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const RunExperimentOptions& options = {});

/// Recomputes the aggregate CSVs from persisted runs in `in_dir`; the bytes
/// reproduce the original run's outputs exactly.
ExperimentResult diagnose(const std::filesystem::path& in_dir, int parallel = 1);

/// Long-run time-averaged CRLB of a config (simulates `horizon` steps with
/// the config's seed and applies the Theorem-4 formula).
CrlbResult crlb_of_config(const ExperimentConfig& config, long horizon,
                          long burn_in);

/// Rebuilds a RunRecord from one persisted run directory (exact, bit-level).
RunRecord load_run_record(const std::filesystem::path& run_dir,
                          const ExperimentConfig& config);

}  // namespace onebit
