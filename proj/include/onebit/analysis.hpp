#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "onebit/errors.hpp"
#include "onebit/estimators.hpp"
#include "onebit/signal_model.hpp"

namespace onebit {

/// Time-averaged covariance functions of a single long run.
/// R_y(tau), R_u(tau) for tau in [0, tau_max]; R_yu(tau) = avg y_k u_{k-tau}
/// for tau in [-tau_max, tau_max].
struct CovarianceFunctionSet {
    Eigen::VectorXd R_y;
    Eigen::VectorXd R_u;
    Eigen::VectorXd R_yu;  // index tau + tau_max
    int tau_max = 0;

    double r_y(int tau) const;
    double r_u(int tau) const;
    double r_yu(int tau) const;  // signed lag
};

/// Single long-run time average (1/K') sum x_k x_{k-tau} over k > burn_in.
double empirical_covariance(std::span<const double> x, int tau, long burn_in);

/// Covariances of a simulated trajectory (y over 1..K, u over 0..K).
CovarianceFunctionSet covariances(const Trajectory& traj, int tau_max, long burn_in);

/// Relative eigenvalue tolerance of the positive-definiteness checks.
inline constexpr double kPdTolerance = 1e-8;

/// Block-Toeplitz persistent-excitation matrix Ebar[phi phi'].
/// Throws NotPositiveDefinite when the minimum eigenvalue is <= 1e-8 * trace.
Eigen::MatrixXd assemble_excitation_matrix(const CovarianceFunctionSet& covs,
                                           int m, int n);

/// Inverse of a symmetric matrix through its eigendecomposition, with the
/// same PD tolerance as above.
Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& M);

struct CrlbResult {
    Eigen::MatrixXd sigma_cr_k;    // original CRLB at time k (empty if no ensemble)
    Eigen::MatrixXd sigma_cr_bar;  // lim k Sigma_CR(k)
    double trace_bar = 0.0;
    long k = 0;
};

/// Sigma_bar_CR = delta_d^2 (Ebar[phi phi'])^-1.
Eigen::MatrixXd sigma_cr_bar(const CovarianceFunctionSet& covs, double delta_d,
                             int m, int n);

/// Sigma_CR(k) = delta_d^2 (sum_{l<=k} E[phi_l phi_l'])^-1, with the expected
/// outer products estimated by an ensemble average (`sum_ephi` is that
/// averaged running sum).
Eigen::MatrixXd sigma_cr_finite(const Eigen::MatrixXd& sum_ephi, double delta_d);

CrlbResult crlb(const CovarianceFunctionSet& covs, double delta_d, int m, int n);
CrlbResult crlb(const CovarianceFunctionSet& covs,
                const Eigen::MatrixXd& ensemble_sum_ephi, double delta_d,
                int m, int n, long k);

// ---------------------------------------------------------------------------
// Tracking diagnostics.

/// omega_k = x_k' theta_hat_k - x_k' theta_rls_{k+m+n}, defined for
/// 1 <= k <= K - (m+n); anticipative, so computed offline from a RunRecord.
struct OmegaTrace {
    Eigen::VectorXd omega;  // index 1..valid_len; omega(0) kept as 0
    long valid_len = 0;
    double rho = 0.0;       // beta_hi + 2 beta_lo / 3
};

OmegaTrace omega_trace(const RunRecord& run);

// ---------------------------------------------------------------------------
// Monte Carlo ensemble statistics.

/// Per-run values extracted at the grid points; everything aggregate() needs.
struct RunSummary {
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::vector<long> grid;
    Eigen::MatrixXd err_remote;              // G x D, theta_hat_k - theta
    Eigen::MatrixXd err_rls;                 // G x D
    Eigen::VectorXd omega;                   // G; NaN where k > K - (m+n)
    std::vector<Eigen::MatrixXd> phi_sum;    // G of D x D: sum_{l<=k} phi phi'
};

RunSummary summarize_run(const RunRecord& run, std::span<const long> grid,
                         std::uint64_t config_hash);

/// Ensemble statistics on the grid. Aggregation order is seed-ascending and
/// fixed, so the result is bit-reproducible.
struct MseAggregate {
    std::vector<long> grid;
    long runs = 0;
    double delta_d = 0.0;
    double rho = 0.0;
    double alpha = 0.0;

    Eigen::VectorXd k_mse;          // k * mean ||theta_hat_k - theta||^2
    Eigen::VectorXd k_mse_rls;      // same for the local RLS estimate
    Eigen::VectorXd k_trace_crlb;   // k * tr(Sigma_CR(k)); NaN before first PD index
    Eigen::VectorXd tail_fraction;  // share of runs with |omega_k| > rho / k^alpha
    Eigen::VectorXd as_stat;        // max over runs of sqrt(k/log k) ||err||
    Eigen::MatrixXd lp_moments;     // G x 3, mean ||err||^p for p = 1, 2, 4
    std::vector<Eigen::MatrixXd> err_cov;  // G of D x D, k * sample covariance (NaN for T < 2)
};

MseAggregate aggregate(std::span<const RunSummary> runs,
                       const StepSchedule& schedule, double delta_d);

/// Theorem-4 normality diagnostics: whitens sqrt(k) * err rows by
/// sigma_cr_bar^-1/2 and reports the Frobenius gap of the sample covariance
/// from identity plus per-component standardized third/fourth moments.
struct NormalityStat {
    double cov_dev_fro = 0.0;
    Eigen::VectorXd skewness;
    Eigen::VectorXd excess_kurtosis;
};

/// errs is T x D (one error vector per run, at time k). pre: T >= 200.
NormalityStat normality_stat(const Eigen::MatrixXd& errs, long k,
                             const Eigen::MatrixXd& sigma_cr_bar);

/// Fisher-information ratio of a sign observation of a Gaussian to the
/// unquantized observation, at normalized threshold c:
///   g(c) = phi_N(c)^2 / (Phi_N(c) (1 - Phi_N(c))).
/// g(0) = 2/pi, the constant behind the one-bit efficiency gap.
double sign_fisher_factor(double normalized_threshold);

}  // namespace onebit
