#include "onebit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

namespace onebit {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double CovarianceFunctionSet::r_y(int tau) const {
    const int t = std::abs(tau);
    if (t > tau_max) throw IndexOutOfRange("CovarianceFunctionSet: |tau| > tau_max");
    return R_y(t);
}

double CovarianceFunctionSet::r_u(int tau) const {
    const int t = std::abs(tau);
    if (t > tau_max) throw IndexOutOfRange("CovarianceFunctionSet: |tau| > tau_max");
    return R_u(t);
}

double CovarianceFunctionSet::r_yu(int tau) const {
    if (std::abs(tau) > tau_max) {
        throw IndexOutOfRange("CovarianceFunctionSet: |tau| > tau_max");
    }
    return R_yu(tau + tau_max);
}

double empirical_covariance(std::span<const double> x, int tau, long burn_in) {
    const long N = static_cast<long>(x.size());
    const long lo = std::max(burn_in + 1, static_cast<long>(std::max(tau, 0)));
    const long hi = tau < 0 ? N - 1 + tau : N - 1;
    if (hi < lo) {
        throw InsufficientData("empirical_covariance: sequence too short for burn_in=" +
                               std::to_string(burn_in) + ", tau=" + std::to_string(tau));
    }
    double sum = 0.0;
    for (long k = lo; k <= hi; ++k) {
        sum += x[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(k - tau)];
    }
    return sum / static_cast<double>(hi - lo + 1);
}

CovarianceFunctionSet covariances(const Trajectory& traj, int tau_max, long burn_in) {
    if (tau_max < 0) throw IndexOutOfRange("covariances: tau_max must be >= 0");
    CovarianceFunctionSet covs;
    covs.tau_max = tau_max;
    covs.R_y.resize(tau_max + 1);
    covs.R_u.resize(tau_max + 1);
    covs.R_yu.resize(2 * tau_max + 1);

    const std::span<const double> y(traj.y.data() + 1, static_cast<std::size_t>(traj.K));
    const std::span<const double> u(traj.u.data(), static_cast<std::size_t>(traj.K + 1));
    for (int tau = 0; tau <= tau_max; ++tau) {
        covs.R_y(tau) = empirical_covariance(y, tau, burn_in);
        covs.R_u(tau) = empirical_covariance(u, tau, burn_in);
    }
    // Cross-covariance avg y_k u_{k-tau}; y runs over 1..K, u over 0..K.
    for (int tau = -tau_max; tau <= tau_max; ++tau) {
        double sum = 0.0;
        long count = 0;
        const long lo = std::max(burn_in + 1, static_cast<long>(std::max(tau, 0)));
        const long hi = std::min(traj.K, traj.K + tau);
        for (long k = lo; k <= hi; ++k) {
            sum += traj.y(k) * traj.u(k - tau);
            ++count;
        }
        if (count < 1) {
            throw InsufficientData("covariances: trajectory too short for cross lag " +
                                   std::to_string(tau));
        }
        covs.R_yu(tau + tau_max) = sum / static_cast<double>(count);
    }
    return covs;
}

namespace {

Eigen::MatrixXd build_excitation(const CovarianceFunctionSet& covs, int m, int n) {
    Eigen::MatrixXd M(m + n, m + n);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) M(i, j) = covs.r_y(i - j);
    }
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            M(i, m + j) = -covs.r_yu(j - i);
            M(m + j, i) = M(i, m + j);
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) M(m + i, m + j) = covs.r_u(i - j);
    }
    return M;
}

}  // namespace

Eigen::MatrixXd assemble_excitation_matrix(const CovarianceFunctionSet& covs,
                                           int m, int n) {
    if (m < 0 || n < 1) throw DimensionMismatch("assemble_excitation_matrix: bad orders");
    if (covs.tau_max < std::max(m, n) - 1) {
        throw InsufficientData("assemble_excitation_matrix: need tau_max >= max(m,n)-1");
    }
    Eigen::MatrixXd M = build_excitation(covs, m, n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() <= kPdTolerance * M.trace()) {
        throw NotPositiveDefinite(
            "assemble_excitation_matrix: persistent excitation lost (min eigenvalue " +
            std::to_string(eig.eigenvalues().minCoeff()) + ")");
    }
    return M;
}

Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (min_eig <= kPdTolerance * M.trace()) {
        throw NotPositiveDefinite("invert_spd: matrix not positive definite (min eigenvalue " +
                                  std::to_string(min_eig) + ")");
    }
    const Eigen::MatrixXd inv = eig.eigenvectors() *
                                eig.eigenvalues().cwiseInverse().asDiagonal() *
                                eig.eigenvectors().transpose();
    return (inv + inv.transpose()) / 2.0;
}

Eigen::MatrixXd sigma_cr_bar(const CovarianceFunctionSet& covs, double delta_d,
                             int m, int n) {
    return delta_d * delta_d * invert_spd(assemble_excitation_matrix(covs, m, n));
}

Eigen::MatrixXd sigma_cr_finite(const Eigen::MatrixXd& sum_ephi, double delta_d) {
    return delta_d * delta_d * invert_spd(sum_ephi);
}

CrlbResult crlb(const CovarianceFunctionSet& covs, double delta_d, int m, int n) {
    CrlbResult res;
    res.sigma_cr_bar = sigma_cr_bar(covs, delta_d, m, n);
    res.trace_bar = res.sigma_cr_bar.trace();
    return res;
}

CrlbResult crlb(const CovarianceFunctionSet& covs,
                const Eigen::MatrixXd& ensemble_sum_ephi, double delta_d,
                int m, int n, long k) {
    CrlbResult res = crlb(covs, delta_d, m, n);
    res.sigma_cr_k = sigma_cr_finite(ensemble_sum_ephi, delta_d);
    res.k = k;
    return res;
}

OmegaTrace omega_trace(const RunRecord& run) {
    const int D = run.dim();
    const long valid = run.K - D;
    if (valid < 1) {
        throw InsufficientHorizon("omega_trace: need K > m+n, got K=" +
                                  std::to_string(run.K));
    }
    OmegaTrace tr;
    tr.valid_len = valid;
    tr.rho = run.schedule.rho();
    tr.omega = Eigen::VectorXd::Zero(valid + 1);
    for (long k = 1; k <= valid; ++k) {
        const int idx = selector(k, D) - 1;
        tr.omega(k) = run.theta_hat_traj(k, idx) - run.theta_rls_traj(k + D, idx);
    }
    return tr;
}

RunSummary summarize_run(const RunRecord& run, std::span<const long> grid,
                         std::uint64_t config_hash) {
    const int D = run.dim();
    const long G = static_cast<long>(grid.size());
    for (long g = 0; g < G; ++g) {
        if (grid[g] < 1 || grid[g] > run.K) {
            throw IndexOutOfRange("summarize_run: grid point " + std::to_string(grid[g]) +
                                  " outside [1, K]");
        }
        if (g > 0 && grid[g] <= grid[g - 1]) {
            throw ConfigMismatch("summarize_run: grid must be strictly increasing");
        }
    }

    RunSummary s;
    s.seed = run.seed;
    s.config_hash = config_hash;
    s.grid.assign(grid.begin(), grid.end());
    s.err_remote.resize(G, D);
    s.err_rls.resize(G, D);
    s.omega.resize(G);
    s.phi_sum.assign(static_cast<std::size_t>(G), Eigen::MatrixXd());

    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(D, D);
    long g = 0;
    for (long l = 1; l <= run.K && g < G; ++l) {
        const Eigen::VectorXd phi = regressor_at(run.signals, run.m, run.n, l);
        acc.noalias() += phi * phi.transpose();
        if (l == grid[g]) {
            s.phi_sum[static_cast<std::size_t>(g)] = acc;
            ++g;
        }
    }
    for (long gg = 0; gg < G; ++gg) {
        const long k = grid[gg];
        s.err_remote.row(gg) = run.theta_hat_traj.row(k) - run.theta_true.transpose();
        s.err_rls.row(gg) = run.theta_rls_traj.row(k) - run.theta_true.transpose();
        if (k <= run.K - D) {
            const int idx = selector(k, D) - 1;
            s.omega(gg) = run.theta_hat_traj(k, idx) - run.theta_rls_traj(k + D, idx);
        } else {
            s.omega(gg) = kNaN;
        }
    }
    return s;
}

MseAggregate aggregate(std::span<const RunSummary> runs,
                       const StepSchedule& schedule, double delta_d) {
    if (runs.empty()) throw InsufficientData("aggregate: no runs");
    const RunSummary& first = runs.front();
    for (std::size_t t = 1; t < runs.size(); ++t) {
        if (runs[t].config_hash != first.config_hash) {
            throw ConfigMismatch("aggregate: run " + std::to_string(t) +
                                 " was produced by a different config");
        }
        if (runs[t].grid != first.grid) {
            throw ConfigMismatch("aggregate: run " + std::to_string(t) +
                                 " has a different grid");
        }
        if (runs[t].seed <= runs[t - 1].seed) {
            throw ConfigMismatch("aggregate: seeds must be distinct and ascending");
        }
    }

    const long G = static_cast<long>(first.grid.size());
    const long T = static_cast<long>(runs.size());
    const long D = first.err_remote.cols();

    MseAggregate agg;
    agg.grid = first.grid;
    agg.runs = T;
    agg.delta_d = delta_d;
    agg.rho = schedule.rho();
    agg.alpha = schedule.alpha;
    agg.k_mse.resize(G);
    agg.k_mse_rls.resize(G);
    agg.k_trace_crlb.resize(G);
    agg.tail_fraction.resize(G);
    agg.as_stat.resize(G);
    agg.lp_moments.resize(G, 3);
    agg.err_cov.assign(static_cast<std::size_t>(G),
                       Eigen::MatrixXd::Constant(D, D, kNaN));

    for (long g = 0; g < G; ++g) {
        const long k = agg.grid[static_cast<std::size_t>(g)];
        const double kd = static_cast<double>(k);

        double sum_sq = 0.0, sum_sq_rls = 0.0, sum_p1 = 0.0, sum_p4 = 0.0;
        double max_norm = 0.0;
        long tail_hits = 0;
        bool omega_available = true;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(D);
        Eigen::MatrixXd phi_mean = Eigen::MatrixXd::Zero(D, D);

        for (long t = 0; t < T; ++t) {
            const RunSummary& r = runs[static_cast<std::size_t>(t)];
            const Eigen::VectorXd e = r.err_remote.row(g).transpose();
            const double norm = e.norm();
            sum_sq += norm * norm;
            sum_p1 += norm;
            sum_p4 += norm * norm * norm * norm;
            sum_sq_rls += r.err_rls.row(g).squaredNorm();
            max_norm = std::max(max_norm, norm);
            mean += e;
            phi_mean += r.phi_sum[static_cast<std::size_t>(g)];
            const double w = r.omega(g);
            if (std::isnan(w)) {
                omega_available = false;
            } else if (std::abs(w) > agg.rho * std::pow(kd, -agg.alpha)) {
                ++tail_hits;
            }
        }
        const double Td = static_cast<double>(T);
        agg.k_mse(g) = kd * sum_sq / Td;
        agg.k_mse_rls(g) = kd * sum_sq_rls / Td;
        agg.lp_moments(g, 0) = sum_p1 / Td;
        agg.lp_moments(g, 1) = sum_sq / Td;
        agg.lp_moments(g, 2) = sum_p4 / Td;
        agg.tail_fraction(g) = omega_available ? static_cast<double>(tail_hits) / Td : kNaN;
        agg.as_stat(g) = k >= 2 ? std::sqrt(kd / std::log(kd)) * max_norm : kNaN;

        phi_mean /= Td;
        try {
            agg.k_trace_crlb(g) = kd * sigma_cr_finite(phi_mean, delta_d).trace();
        } catch (const NotPositiveDefinite&) {
            agg.k_trace_crlb(g) = kNaN;  // pre-PD index: excitation not yet informative
        }

        if (T >= 2) {
            mean /= Td;
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(D, D);
            for (long t = 0; t < T; ++t) {
                const Eigen::VectorXd c =
                    runs[static_cast<std::size_t>(t)].err_remote.row(g).transpose() - mean;
                cov.noalias() += c * c.transpose();
            }
            agg.err_cov[static_cast<std::size_t>(g)] = kd * cov / Td;
        }
    }
    return agg;
}

NormalityStat normality_stat(const Eigen::MatrixXd& errs, long k,
                             const Eigen::MatrixXd& sigma_cr_bar) {
    const long T = errs.rows();
    const long D = errs.cols();
    if (T < 200) {
        throw InsufficientData("normality_stat: need at least 200 runs, got " +
                               std::to_string(T));
    }
    if (sigma_cr_bar.rows() != D || sigma_cr_bar.cols() != D) {
        throw DimensionMismatch("normality_stat: sigma_cr_bar dimension mismatch");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma_cr_bar);
    if (eig.eigenvalues().minCoeff() <= kPdTolerance * sigma_cr_bar.trace()) {
        throw NotPositiveDefinite("normality_stat: sigma_cr_bar not positive definite");
    }
    const Eigen::MatrixXd W = eig.operatorInverseSqrt();

    const Eigen::MatrixXd whitened = std::sqrt(static_cast<double>(k)) * errs * W;
    const Eigen::RowVectorXd mean = whitened.colwise().mean();
    const Eigen::MatrixXd centered = whitened.rowwise() - mean;
    const Eigen::MatrixXd S = centered.transpose() * centered / static_cast<double>(T);

    NormalityStat stat;
    stat.cov_dev_fro = (S - Eigen::MatrixXd::Identity(D, D)).norm();
    stat.skewness.resize(D);
    stat.excess_kurtosis.resize(D);
    for (long j = 0; j < D; ++j) {
        const Eigen::VectorXd c = centered.col(j);
        const double m2 = c.squaredNorm() / static_cast<double>(T);
        const double m3 = c.array().cube().mean();
        const double m4 = c.array().square().square().mean();
        stat.skewness(j) = m3 / std::pow(m2, 1.5);
        stat.excess_kurtosis(j) = m4 / (m2 * m2) - 3.0;
    }
    return stat;
}

double sign_fisher_factor(double normalized_threshold) {
    const double c = normalized_threshold;
    const double density = std::exp(-0.5 * c * c) / std::sqrt(2.0 * std::numbers::pi);
    const double cdf_pos = 0.5 * std::erfc(-c / std::numbers::sqrt2);   // Phi(c)
    const double cdf_neg = 0.5 * std::erfc(c / std::numbers::sqrt2);    // 1 - Phi(c)
    const double denom = cdf_pos * cdf_neg;
    if (denom <= 0.0) return 0.0;  // far-threshold limit
    return density * density / denom;
}

}  // namespace onebit
