#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "onebit/errors.hpp"
#include "onebit/rng.hpp"

namespace onebit {

/// ARX system  y_k + a_1 y_{k-1} + ... + a_m y_{k-m}
///                 = b_1 u_{k-1} + ... + b_n u_{k-n} + d_k,
/// with Gaussian observation noise d_k ~ N(0, noise_std^2).
/// Construct through make_arx, which enforces the stability margin.
struct ArxSystem {
    int m = 0;            // AR order (>= 0; 0 means pure FIR)
    int n = 1;            // exogenous order (>= 1)
    Eigen::VectorXd a;    // a_1..a_m
    Eigen::VectorXd b;    // b_1..b_n
    double noise_std = 1.0;

    int dim() const { return m + n; }

    /// Stacked parameter vector [a_1..a_m, b_1..b_n].
    Eigen::VectorXd theta() const;
};

/// Spectral radius of the companion matrix of z^m + a_1 z^{m-1} + ... + a_m.
/// Returns 0 for m == 0.
double companion_spectral_radius(const Eigen::VectorXd& a);

/// Margin below 1 required of the AR polynomial's root moduli.
inline constexpr double kStabilityMargin = 1e-10;

ArxSystem make_arx(int m, int n, Eigen::VectorXd a, Eigen::VectorXd b,
                   double noise_std);

// ---------------------------------------------------------------------------
// Input generators: bounded deterministic part + i.i.d. zero-mean stochastic
// part. Only the closed-form families used by the experiments are supported.

struct ZeroInput {};
struct ConstantInput { double value = 0.0; };
struct SinusoidInput { double amplitude = 0.0; double angular_freq = 0.0; double phase = 0.0; };
struct PeriodicTableInput { std::vector<double> values; };
using DeterministicInput = std::variant<ZeroInput, ConstantInput, SinusoidInput, PeriodicTableInput>;

struct NoStochastic {};
struct GaussianInput { double variance = 1.0; };
struct UniformInput { double lo = -1.0; double hi = 1.0; };
using StochasticInput = std::variant<NoStochastic, GaussianInput, UniformInput>;

struct SignalGenerator {
    DeterministicInput deterministic = ZeroInput{};
    StochasticInput stochastic = NoStochastic{};
    std::uint64_t seed = 0;  // folded into the input substream only
};

/// Deterministic part of u_k; a pure function of k.
double deterministic_at(const SignalGenerator& gen, long k);

/// Draws u_0, u_1, ... in order, consuming the run's input substream.
class InputStream {
public:
    InputStream(const SignalGenerator& gen, std::uint64_t run_seed);

    /// Value of u_k for the next k (starting at k = 0).
    double next();

    long position() const { return k_; }

private:
    SignalGenerator gen_;
    RngStream stream_;
    long k_ = 0;
};

/// u_k from a stream positioned at k. The stream advances by one.
double input_at(InputStream& stream, long k);

// ---------------------------------------------------------------------------

/// Simulated signals with the paper's zero initial conventions:
/// y_k = 0 for k <= 0 and u_k = 0 for k < 0. Noise draws are stored so the
/// regression identity y_k = phi_k' theta + d_k is reproducible offline.
struct Trajectory {
    Eigen::VectorXd y;  // index 1..K valid; y(0) kept as 0
    Eigen::VectorXd u;  // index 0..K valid
    Eigen::VectorXd d;  // index 1..K valid; d(0) kept as 0
    long K = 0;

    double y_at(long k) const { return (k <= 0 || k > K) ? 0.0 : y(k); }
    double u_at(long k) const { return (k < 0 || k > K) ? 0.0 : u(k); }
};

/// Runs the ARX recursion on externally supplied inputs and noise.
/// u has K+1 entries (u_0..u_K); d has K+1 entries with d(0) ignored.
Trajectory simulate_with(const ArxSystem& sys, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& d);

/// Draws inputs and noise from the seeded substreams, then runs the recursion.
Trajectory simulate(const ArxSystem& sys, const SignalGenerator& gen, long K,
                    std::uint64_t seed);

/// phi_k = [-y_{k-1},...,-y_{k-m}, u_{k-1},...,u_{k-n}], 1 <= k <= K.
Eigen::VectorXd regressor_at(const Trajectory& traj, int m, int n, long k);
Eigen::VectorXd regressor_at(const Trajectory& traj, const ArxSystem& sys, long k);

}  // namespace onebit
