#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "onebit/errors.hpp"
#include "onebit/signal_model.hpp"

namespace onebit {

/// Quantizer-side recursive least-squares state.
struct RlsState {
    Eigen::VectorXd theta;  // local estimate
    Eigen::MatrixXd P;      // covariance-like matrix, kept symmetric
    long k = 0;

    /// Validates that P0 is symmetric positive definite.
    static RlsState init(const Eigen::VectorXd& theta0, const Eigen::MatrixXd& P0);
};

struct RlsStep {
    RlsState state;
    double gain = 0.0;  // a_k = 1 / (1 + phi' P phi), in (0, 1]
};

/// One RLS recursion step:
///   a_k   = (1 + phi' P phi)^-1
///   theta = theta + a_k P phi (y - phi' theta)
///   P     = P - a_k P phi phi' P, then re-symmetrized.
RlsStep rls_update(const RlsState& state, const Eigen::VectorXd& phi, double y);

/// Cyclic component selector: mod(k, dim) + 1, a 1-based index.
int selector(long k, int dim);

/// One symbol of the binary channel.
struct OneBitSymbol {
    std::int8_t s = -1;  // -1 or +1
};

/// s = +1 iff the selected component of the fresh local estimate strictly
/// exceeds the same component of the previous remote estimate; ties give -1.
OneBitSymbol encode(const Eigen::VectorXd& theta_rls_k,
                    const Eigen::VectorXd& theta_hat_prev, int x_index);

/// Step sizes beta_k k^-alpha with 1/2 < alpha < 1 and
/// 0 < beta_lo <= beta_k <= beta_hi < inf.
struct StepSchedule {
    double alpha = 0.95;
    double beta_lo = 1.0;
    double beta_hi = 1.0;
    /// Optional per-k sequence; empty means the constant beta_lo (== beta_hi).
    std::function<double(long)> beta_fn;

    double beta(long k) const;
    double step(long k) const;               // beta(k) * k^-alpha
    double rho() const { return beta_hi + 2.0 * beta_lo / 3.0; }

    static StepSchedule constant(double alpha, double beta);
    void validate() const;
};

/// Remote (decoder-side) estimator state.
struct RemoteState {
    Eigen::VectorXd theta_hat;
    StepSchedule schedule;
    long k = 0;
};

/// theta_hat[x_index] moves by s * beta_k k^-alpha; everything else unchanged.
/// pre: k == state.k + 1.
RemoteState sa_update(const RemoteState& state, OneBitSymbol s, int x_index, long k);

/// Replays the SA recursion from the transcript and the shared configuration
/// alone. Row k of the result is theta_hat_k (row 0 = theta_hat_0).
Eigen::MatrixXd sa_decode(std::span<const std::int8_t> transcript,
                          const StepSchedule& schedule,
                          const Eigen::VectorXd& theta_hat0, int dim);

struct RunOptions {
    bool record_P = false;      // keep the whole P trajectory (memory-heavy)
    bool check_replica = true;  // verify sa_decode(transcript) == recorded remote path
};

/// Everything one seeded run produces.
struct RunRecord {
    std::uint64_t seed = 0;
    int m = 0, n = 0;
    long K = 0;
    Eigen::VectorXd theta_true;
    StepSchedule schedule;

    Eigen::MatrixXd theta_hat_traj;  // (K+1) x D, row k = remote estimate at k
    Eigen::MatrixXd theta_rls_traj;  // (K+1) x D
    std::vector<std::int8_t> transcript;  // K symbols in {-1, +1}
    Trajectory signals;
    Eigen::MatrixXd P_final;
    std::vector<Eigen::MatrixXd> P_traj;  // only if record_P

    int dim() const { return m + n; }
};

/// Lock-step protocol: per k, RLS update -> selector -> encode -> SA update on
/// the quantizer's replica, with the remote side reconstructed from the
/// transcript afterwards. Exactly one symbol crosses the channel per step.
RunRecord run_rls_sa(const ArxSystem& sys, const SignalGenerator& gen,
                     const StepSchedule& schedule,
                     const Eigen::VectorXd& theta_rls0,
                     const Eigen::MatrixXd& P0,
                     const Eigen::VectorXd& theta_hat0, long K,
                     std::uint64_t seed, const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Channel transcript export formats (bit-exact, for cross-implementation
// comparison):
//  * ASCII: one byte per symbol, '+' for +1 and '-' for -1, no terminator.
//  * Packed: bit i = (s_i + 1) / 2, little-endian within each byte; the final
//    byte is zero-padded. ceil(K / 8) bytes total.

std::string transcript_to_ascii(std::span<const std::int8_t> s);
std::vector<std::int8_t> transcript_from_ascii(std::string_view text);
std::vector<std::uint8_t> pack_transcript(std::span<const std::int8_t> s);
std::vector<std::int8_t> unpack_transcript(std::span<const std::uint8_t> bytes,
                                           std::size_t count);

}  // namespace onebit
