#include "onebit/signal_model.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace onebit {

Eigen::VectorXd ArxSystem::theta() const {
    Eigen::VectorXd t(dim());
    t.head(m) = a;
    t.tail(n) = b;
    return t;
}

double companion_spectral_radius(const Eigen::VectorXd& a) {
    const Eigen::Index m = a.size();
    if (m == 0) return 0.0;
    if (m == 1) return std::abs(a(0));
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(m, m);
    comp.row(0) = -a.transpose();
    comp.block(1, 0, m - 1, m - 1).setIdentity();
    return comp.eigenvalues().cwiseAbs().maxCoeff();
}

ArxSystem make_arx(int m, int n, Eigen::VectorXd a, Eigen::VectorXd b,
                   double noise_std) {
    if (m < 0 || n < 1) {
        throw DimensionMismatch("make_arx: require m >= 0 and n >= 1, got m=" +
                                std::to_string(m) + " n=" + std::to_string(n));
    }
    if (a.size() != m || b.size() != n) {
        std::ostringstream msg;
        msg << "make_arx: coefficient lengths (" << a.size() << ", " << b.size()
            << ") do not match orders (" << m << ", " << n << ")";
        throw DimensionMismatch(msg.str());
    }
    if (!(noise_std > 0.0) || !std::isfinite(noise_std)) {
        throw ValidationError("make_arx: noise_std must be positive and finite");
    }
    if (!a.allFinite() || !b.allFinite()) {
        throw ValidationError("make_arx: coefficients must be finite");
    }
    const double radius = companion_spectral_radius(a);
    if (radius >= 1.0 - kStabilityMargin) {
        std::ostringstream msg;
        msg << "make_arx: AR polynomial spectral radius " << radius
            << " >= " << 1.0 - kStabilityMargin;
        throw UnstablePolynomial(msg.str());
    }
    return ArxSystem{m, n, std::move(a), std::move(b), noise_std};
}

double deterministic_at(const SignalGenerator& gen, long k) {
    return std::visit(
        [k](const auto& part) -> double {
            using T = std::decay_t<decltype(part)>;
            if constexpr (std::is_same_v<T, ZeroInput>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, ConstantInput>) {
                return part.value;
            } else if constexpr (std::is_same_v<T, SinusoidInput>) {
                return part.amplitude *
                       std::sin(part.angular_freq * static_cast<double>(k) + part.phase);
            } else {
                if (part.values.empty()) return 0.0;
                const auto period = static_cast<long>(part.values.size());
                long idx = k % period;
                if (idx < 0) idx += period;
                return part.values[static_cast<std::size_t>(idx)];
            }
        },
        gen.deterministic);
}

InputStream::InputStream(const SignalGenerator& gen, std::uint64_t run_seed)
    : gen_(gen),
      stream_(run_seed, derive_stream_seed(gen.seed, kInputStreamTag)) {}

double InputStream::next() {
    const double det = deterministic_at(gen_, k_);
    ++k_;
    return std::visit(
        [&](const auto& part) -> double {
            using T = std::decay_t<decltype(part)>;
            if constexpr (std::is_same_v<T, NoStochastic>) {
                return det;
            } else if constexpr (std::is_same_v<T, GaussianInput>) {
                return det + stream_.gaussian(std::sqrt(part.variance));
            } else {
                return det + stream_.uniform(part.lo, part.hi);
            }
        },
        gen_.stochastic);
}

double input_at(InputStream& stream, long k) {
    if (stream.position() != k) {
        throw IndexOutOfRange("input_at: stream is at k=" +
                              std::to_string(stream.position()) +
                              ", requested k=" + std::to_string(k));
    }
    return stream.next();
}

Trajectory simulate_with(const ArxSystem& sys, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& d) {
    const long K = static_cast<long>(u.size()) - 1;
    if (K < 1) throw DimensionMismatch("simulate_with: need K >= 1");
    if (d.size() != K + 1) {
        throw DimensionMismatch("simulate_with: d must have K+1 entries");
    }
    if (!u.allFinite() || !d.allFinite()) {
        throw NonFiniteInput("simulate_with: non-finite input or noise");
    }

    Trajectory traj;
    traj.K = K;
    traj.u = u;
    traj.d = d;
    traj.d(0) = 0.0;
    traj.y = Eigen::VectorXd::Zero(K + 1);
    for (long k = 1; k <= K; ++k) {
        double yk = 0.0;
        for (int i = 1; i <= sys.m; ++i) yk -= sys.a(i - 1) * traj.y_at(k - i);
        for (int j = 1; j <= sys.n; ++j) yk += sys.b(j - 1) * traj.u_at(k - j);
        traj.y(k) = yk + d(k);
    }
    return traj;
}

Trajectory simulate(const ArxSystem& sys, const SignalGenerator& gen, long K,
                    std::uint64_t seed) {
    if (K < 1) throw DimensionMismatch("simulate: need K >= 1");
    InputStream in(gen, seed);
    RngStream noise(seed, kNoiseStreamTag);

    Eigen::VectorXd u(K + 1), d(K + 1);
    for (long k = 0; k <= K; ++k) u(k) = in.next();
    d(0) = 0.0;
    for (long k = 1; k <= K; ++k) d(k) = noise.gaussian(sys.noise_std);
    return simulate_with(sys, u, d);
}

Eigen::VectorXd regressor_at(const Trajectory& traj, int m, int n, long k) {
    if (k < 1 || k > traj.K) {
        throw IndexOutOfRange("regressor_at: k=" + std::to_string(k) +
                              " outside [1, " + std::to_string(traj.K) + "]");
    }
    Eigen::VectorXd phi(m + n);
    for (int i = 1; i <= m; ++i) phi(i - 1) = -traj.y_at(k - i);
    for (int j = 1; j <= n; ++j) phi(m + j - 1) = traj.u_at(k - j);
    return phi;
}

Eigen::VectorXd regressor_at(const Trajectory& traj, const ArxSystem& sys, long k) {
    return regressor_at(traj, sys.m, sys.n, k);
}

}  // namespace onebit
