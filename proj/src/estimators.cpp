#include "onebit/estimators.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace onebit {

RlsState RlsState::init(const Eigen::VectorXd& theta0, const Eigen::MatrixXd& P0) {
    if (P0.rows() != P0.cols() || P0.rows() != theta0.size()) {
        throw DimensionMismatch("RlsState::init: P0 must be square and match theta0");
    }
    if ((P0 - P0.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + P0.cwiseAbs().maxCoeff())) {
        throw ValidationError("RlsState::init: P0 must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P0);
    if (eig.eigenvalues().minCoeff() <= 0.0) {
        throw NotPositiveDefinite("RlsState::init: P0 must be positive definite");
    }
    return RlsState{theta0, (P0 + P0.transpose()) / 2.0, 0};
}

RlsStep rls_update(const RlsState& state, const Eigen::VectorXd& phi, double y) {
    if (phi.size() != state.theta.size()) {
        throw DimensionMismatch("rls_update: phi dimension mismatch");
    }
    if (!phi.allFinite() || !std::isfinite(y)) {
        throw NonFiniteInput("rls_update: non-finite phi or y");
    }

    const Eigen::VectorXd Pphi = state.P * phi;
    const double gain = 1.0 / (1.0 + phi.dot(Pphi));

    RlsStep step;
    step.gain = gain;
    step.state.k = state.k + 1;
    step.state.theta = state.theta + gain * Pphi * (y - phi.dot(state.theta));
    Eigen::MatrixXd P = state.P - gain * Pphi * Pphi.transpose();
    step.state.P = (P + P.transpose()) / 2.0;  // controls asymmetry drift
    return step;
}

int selector(long k, int dim) {
    if (k < 1 || dim < 1) throw IndexOutOfRange("selector: need k >= 1, dim >= 1");
    return static_cast<int>(k % dim) + 1;
}

OneBitSymbol encode(const Eigen::VectorXd& theta_rls_k,
                    const Eigen::VectorXd& theta_hat_prev, int x_index) {
    if (theta_rls_k.size() != theta_hat_prev.size()) {
        throw DimensionMismatch("encode: estimate dimensions differ");
    }
    if (x_index < 1 || x_index > theta_rls_k.size()) {
        throw IndexOutOfRange("encode: x_index out of range");
    }
    // Ties fall in the "<=" indicator and give -1.
    const bool greater = theta_rls_k(x_index - 1) > theta_hat_prev(x_index - 1);
    return OneBitSymbol{static_cast<std::int8_t>(greater ? 1 : -1)};
}

double StepSchedule::beta(long k) const {
    if (!beta_fn) return beta_lo;
    const double v = beta_fn(k);
    if (!(v >= beta_lo && v <= beta_hi)) {
        throw ValidationError("StepSchedule: beta_k outside [beta_lo, beta_hi] at k=" +
                              std::to_string(k));
    }
    return v;
}

double StepSchedule::step(long k) const {
    // k^-alpha from the integer index each step; no incremental accumulation.
    return beta(k) * std::pow(static_cast<double>(k), -alpha);
}

StepSchedule StepSchedule::constant(double alpha, double beta) {
    StepSchedule s;
    s.alpha = alpha;
    s.beta_lo = s.beta_hi = beta;
    s.validate();
    return s;
}

void StepSchedule::validate() const {
    if (!(alpha > 0.5 && alpha < 1.0)) {
        throw ValidationError("StepSchedule: alpha must lie strictly in (1/2, 1)");
    }
    if (!(beta_lo > 0.0 && beta_lo <= beta_hi) || !std::isfinite(beta_hi)) {
        throw ValidationError("StepSchedule: require 0 < beta_lo <= beta_hi < inf");
    }
    if (!beta_fn && beta_lo != beta_hi) {
        throw ValidationError("StepSchedule: non-constant bounds need a beta sequence");
    }
}

RemoteState sa_update(const RemoteState& state, OneBitSymbol s, int x_index, long k) {
    if (k != state.k + 1) {
        throw IndexOutOfRange("sa_update: k=" + std::to_string(k) +
                              " does not follow state.k=" + std::to_string(state.k));
    }
    if (x_index < 1 || x_index > state.theta_hat.size()) {
        throw IndexOutOfRange("sa_update: x_index out of range");
    }
    RemoteState next = state;
    next.k = k;
    next.theta_hat(x_index - 1) += static_cast<double>(s.s) * state.schedule.step(k);
    return next;
}

Eigen::MatrixXd sa_decode(std::span<const std::int8_t> transcript,
                          const StepSchedule& schedule,
                          const Eigen::VectorXd& theta_hat0, int dim) {
    if (theta_hat0.size() != dim) {
        throw DimensionMismatch("sa_decode: theta_hat0 dimension mismatch");
    }
    const long K = static_cast<long>(transcript.size());
    Eigen::MatrixXd traj(K + 1, dim);
    traj.row(0) = theta_hat0.transpose();
    RemoteState state{theta_hat0, schedule, 0};
    for (long k = 1; k <= K; ++k) {
        const int idx = selector(k, dim);
        state = sa_update(state, OneBitSymbol{transcript[static_cast<std::size_t>(k - 1)]},
                          idx, k);
        traj.row(k) = state.theta_hat.transpose();
    }
    return traj;
}

RunRecord run_rls_sa(const ArxSystem& sys, const SignalGenerator& gen,
                     const StepSchedule& schedule,
                     const Eigen::VectorXd& theta_rls0,
                     const Eigen::MatrixXd& P0,
                     const Eigen::VectorXd& theta_hat0, long K,
                     std::uint64_t seed, const RunOptions& options) {
    schedule.validate();
    const int D = sys.dim();
    if (theta_rls0.size() != D || theta_hat0.size() != D) {
        throw DimensionMismatch("run_rls_sa: initial estimates must have dimension m+n");
    }

    RunRecord rec;
    rec.seed = seed;
    rec.m = sys.m;
    rec.n = sys.n;
    rec.K = K;
    rec.theta_true = sys.theta();
    rec.schedule = schedule;
    rec.signals = simulate(sys, gen, K, seed);
    rec.theta_hat_traj.resize(K + 1, D);
    rec.theta_rls_traj.resize(K + 1, D);
    rec.transcript.resize(static_cast<std::size_t>(K));
    if (options.record_P) rec.P_traj.reserve(static_cast<std::size_t>(K));

    RlsState rls = RlsState::init(theta_rls0, P0);
    // Quantizer-side replica of the remote estimate; the remote side applies
    // the identical update from the received symbol.
    RemoteState replica{theta_hat0, schedule, 0};

    rec.theta_hat_traj.row(0) = theta_hat0.transpose();
    rec.theta_rls_traj.row(0) = theta_rls0.transpose();

    for (long k = 1; k <= K; ++k) {
        const Eigen::VectorXd phi = regressor_at(rec.signals, sys, k);
        rls = rls_update(rls, phi, rec.signals.y(k)).state;
        const int idx = selector(k, D);
        const OneBitSymbol s = encode(rls.theta, replica.theta_hat, idx);
        replica = sa_update(replica, s, idx, k);

        rec.transcript[static_cast<std::size_t>(k - 1)] = s.s;
        rec.theta_rls_traj.row(k) = rls.theta.transpose();
        rec.theta_hat_traj.row(k) = replica.theta_hat.transpose();
        if (options.record_P) rec.P_traj.push_back(rls.P);
    }
    rec.P_final = rls.P;

    if (options.check_replica) {
        // The remote estimator sees only the transcript and the shared
        // configuration; its replay must match the replica path exactly.
        const Eigen::MatrixXd remote =
            sa_decode(rec.transcript, schedule, theta_hat0, D);
        if (remote != rec.theta_hat_traj) {
            throw Error("run_rls_sa: remote replay diverged from quantizer replica");
        }
    }
    return rec;
}

std::string transcript_to_ascii(std::span<const std::int8_t> s) {
    std::string out(s.size(), '-');
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] > 0 ? '+' : '-';
    return out;
}

std::vector<std::int8_t> transcript_from_ascii(std::string_view text) {
    std::vector<std::int8_t> out(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '+') {
            out[i] = 1;
        } else if (text[i] == '-') {
            out[i] = -1;
        } else {
            throw ParseError("transcript_from_ascii: unexpected character at index " +
                             std::to_string(i));
        }
    }
    return out;
}

std::vector<std::uint8_t> pack_transcript(std::span<const std::int8_t> s) {
    std::vector<std::uint8_t> bytes((s.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] > 0) bytes[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    return bytes;
}

std::vector<std::int8_t> unpack_transcript(std::span<const std::uint8_t> bytes,
                                           std::size_t count) {
    if (bytes.size() != (count + 7) / 8) {
        throw DimensionMismatch("unpack_transcript: byte count does not match symbol count");
    }
    std::vector<std::int8_t> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = (bytes[i / 8] >> (i % 8)) & 1u ? 1 : -1;
    }
    return out;
}

}  // namespace onebit
