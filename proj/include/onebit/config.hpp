#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "onebit/estimators.hpp"
#include "onebit/signal_model.hpp"

namespace onebit {

/// A fully validated experiment description. Built from flat key-value text
/// with dotted section prefixes, e.g.
///
///   system.m = 1
///   system.a = 0.2
///   input.kind = "sinusoid+gaussian"
///   run.K = 10000
///
/// Unknown keys are rejected; defaults follow the experiment conventions
/// (alpha = 0.95, beta = 1, P0 = I/10, zero initial estimates).
struct ExperimentConfig {
    ArxSystem system;
    SignalGenerator input;
    StepSchedule schedule;
    Eigen::VectorXd theta_hat0;
    Eigen::VectorXd theta_rls0;
    double p0_scale = 0.1;  // P0 = p0_scale * I

    long K = 0;
    long T = 1;
    std::uint64_t base_seed = 1;
    std::vector<long> grid;
    std::string out_dir = "out";

    Eigen::MatrixXd P0() const;

    /// Canonical echo of the resolved config; itself a loadable config file.
    std::string resolved_text() const;

    /// FNV-1a over resolved_text().
    std::uint64_t hash() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_text(const std::string& text,
                                  const std::string& source_name);

/// 1-2-5 decade series intersected with [1, K], plus K itself.
std::vector<long> default_grid(long K);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace onebit
