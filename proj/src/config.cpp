#include "onebit/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "onebit/csv.hpp"
#include "onebit/errors.hpp"

namespace onebit {

namespace {

struct RawEntry {
    std::string value;
    int line = 0;
};

const std::set<std::string> kKnownKeys = {
    "system.m", "system.n", "system.a", "system.b", "system.noise_std",
    "input.kind", "input.amplitude", "input.angular_freq", "input.phase",
    "input.constant", "input.table", "input.lo", "input.hi", "input.variance",
    "input.seed",
    "estimator.alpha", "estimator.beta", "estimator.theta_hat0",
    "estimator.theta_rls0", "estimator.p0_scale",
    "run.K", "run.T", "run.seed", "run.grid", "run.out",
};

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string strip_comment(const std::string& line) {
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_quote = !in_quote;
        if (line[i] == '#' && !in_quote) return line.substr(0, i);
    }
    return line;
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

class RawConfig {
public:
    RawConfig(const std::string& text, std::string source) : source_(std::move(source)) {
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string body = trim(strip_comment(line));
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string::npos) {
                fail(lineno, "expected 'key = value'");
            }
            const std::string key = trim(body.substr(0, eq));
            const std::string value = unquote(trim(body.substr(eq + 1)));
            if (!kKnownKeys.count(key)) fail(lineno, "unknown key '" + key + "'");
            if (entries_.count(key)) fail(lineno, "duplicate key '" + key + "'");
            entries_[key] = RawEntry{value, lineno};
        }
    }

    [[noreturn]] void fail(int line, const std::string& what) const {
        throw ParseError(source_ + ":" + std::to_string(line) + ": " + what);
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    const RawEntry& require(const std::string& key) const {
        const auto it = entries_.find(key);
        if (it == entries_.end()) {
            throw ValidationError(source_ + ": missing required key '" + key + "'");
        }
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = entries_.find(key);
        return it == entries_.end() ? fallback : it->second.value;
    }

    double get_double(const std::string& key) const { return to_double(require(key), key); }

    double get_double(const std::string& key, double fallback) const {
        const auto it = entries_.find(key);
        return it == entries_.end() ? fallback : to_double(it->second, key);
    }

    long get_long(const std::string& key) const { return to_long(require(key), key); }

    long get_long(const std::string& key, long fallback) const {
        const auto it = entries_.find(key);
        return it == entries_.end() ? fallback : to_long(it->second, key);
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        try {
            std::size_t pos = 0;
            const std::uint64_t v = std::stoull(it->second.value, &pos);
            if (pos != it->second.value.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            fail(it->second.line, "key '" + key + "': not an unsigned integer");
        }
    }

    std::vector<double> get_vector(const std::string& key) const {
        return to_vector(require(key), key);
    }

    std::vector<double> get_vector(const std::string& key,
                                   const std::vector<double>& fallback) const {
        const auto it = entries_.find(key);
        return it == entries_.end() ? fallback : to_vector(it->second, key);
    }

    void mark_used(const std::string& key) { used_.insert(key); }

    /// mark_used covers conditional keys; everything present must be consumed.
    void check_all_used(const std::set<std::string>& always_used) const {
        for (const auto& [key, entry] : entries_) {
            if (!always_used.count(key) && !used_.count(key)) {
                fail(entry.line, "key '" + key + "' does not apply to this configuration");
            }
        }
    }

private:
    double to_double(const RawEntry& e, const std::string& key) const {
        try {
            return parse_double(e.value);
        } catch (const ParseError&) {
            fail(e.line, "key '" + key + "': not a number ('" + e.value + "')");
        }
    }

    long to_long(const RawEntry& e, const std::string& key) const {
        try {
            return parse_long(e.value);
        } catch (const ParseError&) {
            fail(e.line, "key '" + key + "': not an integer ('" + e.value + "')");
        }
    }

    std::vector<double> to_vector(const RawEntry& e, const std::string& key) const {
        std::vector<double> out;
        std::string item;
        std::istringstream in(e.value);
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                out.push_back(parse_double(item));
            } catch (const ParseError&) {
                fail(e.line, "key '" + key + "': not a number ('" + item + "')");
            }
        }
        return out;
    }

    std::string source_;
    std::map<std::string, RawEntry> entries_;
    std::set<std::string> used_;
};

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string join_vector(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i > 0) out += ", ";
        out += format_shortest(v(i));
    }
    return out;
}

std::string join_grid(const std::vector<long>& grid) {
    std::string out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i > 0) out += ", ";
        out += std::to_string(grid[i]);
    }
    return out;
}

std::pair<std::string, std::string> split_kind(const std::string& kind) {
    const auto plus = kind.find('+');
    if (plus == std::string::npos) {
        throw ValidationError("input.kind must be '<deterministic>+<stochastic>', got '" +
                              kind + "'");
    }
    return {kind.substr(0, plus), kind.substr(plus + 1)};
}

}  // namespace

std::vector<long> default_grid(long K) {
    std::vector<long> grid;
    for (long decade = 1; decade <= K; decade *= 10) {
        for (long mult : {1L, 2L, 5L}) {
            const long v = decade * mult;
            if (v <= K) grid.push_back(v);
        }
        if (decade > K / 10) break;
    }
    if (grid.empty() || grid.back() != K) grid.push_back(K);
    return grid;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : bytes) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

Eigen::MatrixXd ExperimentConfig::P0() const {
    return p0_scale * Eigen::MatrixXd::Identity(system.dim(), system.dim());
}

ExperimentConfig config_from_text(const std::string& text,
                                  const std::string& source_name) {
    RawConfig raw(text, source_name);

    ExperimentConfig cfg;
    const int m = static_cast<int>(raw.get_long("system.m"));
    const int n = static_cast<int>(raw.get_long("system.n"));
    const Eigen::VectorXd a = to_eigen(raw.get_vector("system.a", {}));
    const Eigen::VectorXd b = to_eigen(raw.get_vector("system.b"));
    const double noise_std = raw.get_double("system.noise_std");
    try {
        cfg.system = make_arx(m, n, a, b, noise_std);
    } catch (const UnstablePolynomial& e) {
        throw ValidationError(std::string("UnstablePolynomial: ") + e.what());
    } catch (const DimensionMismatch& e) {
        throw ValidationError(std::string("DimensionMismatch: ") + e.what());
    }

    const std::string kind = raw.get_string("input.kind", "zero+none");
    const auto [det, stoch] = split_kind(kind);
    if (det == "zero") {
        cfg.input.deterministic = ZeroInput{};
    } else if (det == "constant") {
        cfg.input.deterministic = ConstantInput{raw.get_double("input.constant")};
        raw.mark_used("input.constant");
    } else if (det == "sinusoid") {
        cfg.input.deterministic = SinusoidInput{raw.get_double("input.amplitude"),
                                                raw.get_double("input.angular_freq"),
                                                raw.get_double("input.phase", 0.0)};
        raw.mark_used("input.amplitude");
        raw.mark_used("input.angular_freq");
        raw.mark_used("input.phase");
    } else if (det == "table") {
        cfg.input.deterministic = PeriodicTableInput{raw.get_vector("input.table")};
        raw.mark_used("input.table");
    } else {
        throw ValidationError("input.kind: unknown deterministic part '" + det + "'");
    }
    if (stoch == "none") {
        cfg.input.stochastic = NoStochastic{};
    } else if (stoch == "gaussian") {
        const double variance = raw.get_double("input.variance");
        if (!(variance > 0.0)) throw ValidationError("input.variance must be positive");
        cfg.input.stochastic = GaussianInput{variance};
        raw.mark_used("input.variance");
    } else if (stoch == "uniform") {
        const double lo = raw.get_double("input.lo");
        const double hi = raw.get_double("input.hi");
        if (!(lo < hi)) throw ValidationError("input.lo must be below input.hi");
        cfg.input.stochastic = UniformInput{lo, hi};
        raw.mark_used("input.lo");
        raw.mark_used("input.hi");
    } else {
        throw ValidationError("input.kind: unknown stochastic part '" + stoch + "'");
    }
    cfg.input.seed = raw.get_u64("input.seed", 0);

    cfg.schedule = StepSchedule::constant(raw.get_double("estimator.alpha", 0.95),
                                          raw.get_double("estimator.beta", 1.0));
    const int D = cfg.system.dim();
    const std::vector<double> zeros(static_cast<std::size_t>(D), 0.0);
    cfg.theta_hat0 = to_eigen(raw.get_vector("estimator.theta_hat0", zeros));
    cfg.theta_rls0 = to_eigen(raw.get_vector("estimator.theta_rls0", zeros));
    if (cfg.theta_hat0.size() != D || cfg.theta_rls0.size() != D) {
        throw ValidationError("initial estimates must have dimension m+n = " +
                              std::to_string(D));
    }
    cfg.p0_scale = raw.get_double("estimator.p0_scale", 0.1);
    if (!(cfg.p0_scale > 0.0)) throw ValidationError("estimator.p0_scale must be positive");

    cfg.K = raw.get_long("run.K");
    if (cfg.K < 1) throw ValidationError("run.K must be >= 1");
    cfg.T = raw.get_long("run.T", 1);
    if (cfg.T < 1) throw ValidationError("run.T must be >= 1");
    cfg.base_seed = raw.get_u64("run.seed", 1);
    cfg.out_dir = raw.get_string("run.out", "out");

    if (raw.has("run.grid")) {
        std::vector<long> grid;
        for (const double v : raw.get_vector("run.grid")) {
            const long k = static_cast<long>(std::llround(v));
            if (k < 1 || k > cfg.K) {
                throw ValidationError("run.grid entries must lie in [1, K]");
            }
            grid.push_back(k);
        }
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        if (grid.empty()) throw ValidationError("run.grid must not be empty");
        cfg.grid = grid;
        raw.mark_used("run.grid");
    } else {
        cfg.grid = default_grid(cfg.K);
    }

    raw.check_all_used({"system.m", "system.n", "system.a", "system.b",
                        "system.noise_std", "input.kind", "input.seed",
                        "estimator.alpha", "estimator.beta", "estimator.theta_hat0",
                        "estimator.theta_rls0", "estimator.p0_scale", "run.K",
                        "run.T", "run.seed", "run.out"});
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return config_from_text(text, path);
}

std::string ExperimentConfig::resolved_text() const {
    std::string out;
    out += "# onebit-sysid experiment configuration (resolved)\n";
    out += "system.m = " + std::to_string(system.m) + "\n";
    out += "system.n = " + std::to_string(system.n) + "\n";
    out += "system.a = " + join_vector(system.a) + "\n";
    out += "system.b = " + join_vector(system.b) + "\n";
    out += "system.noise_std = " + format_shortest(system.noise_std) + "\n";

    std::string det, stoch, params;
    std::visit(
        [&](const auto& part) {
            using T = std::decay_t<decltype(part)>;
            if constexpr (std::is_same_v<T, ZeroInput>) {
                det = "zero";
            } else if constexpr (std::is_same_v<T, ConstantInput>) {
                det = "constant";
                params += "input.constant = " + format_shortest(part.value) + "\n";
            } else if constexpr (std::is_same_v<T, SinusoidInput>) {
                det = "sinusoid";
                params += "input.amplitude = " + format_shortest(part.amplitude) + "\n";
                params += "input.angular_freq = " + format_shortest(part.angular_freq) + "\n";
                params += "input.phase = " + format_shortest(part.phase) + "\n";
            } else {
                det = "table";
                params += "input.table = " +
                          join_vector(to_eigen(part.values)) + "\n";
            }
        },
        input.deterministic);
    std::visit(
        [&](const auto& part) {
            using T = std::decay_t<decltype(part)>;
            if constexpr (std::is_same_v<T, NoStochastic>) {
                stoch = "none";
            } else if constexpr (std::is_same_v<T, GaussianInput>) {
                stoch = "gaussian";
                params += "input.variance = " + format_shortest(part.variance) + "\n";
            } else {
                stoch = "uniform";
                params += "input.lo = " + format_shortest(part.lo) + "\n";
                params += "input.hi = " + format_shortest(part.hi) + "\n";
            }
        },
        input.stochastic);
    out += "input.kind = \"" + det + "+" + stoch + "\"\n";
    out += params;
    out += "input.seed = " + std::to_string(input.seed) + "\n";

    out += "estimator.alpha = " + format_shortest(schedule.alpha) + "\n";
    out += "estimator.beta = " + format_shortest(schedule.beta_lo) + "\n";
    out += "estimator.theta_hat0 = " + join_vector(theta_hat0) + "\n";
    out += "estimator.theta_rls0 = " + join_vector(theta_rls0) + "\n";
    out += "estimator.p0_scale = " + format_shortest(p0_scale) + "\n";

    out += "run.K = " + std::to_string(K) + "\n";
    out += "run.T = " + std::to_string(T) + "\n";
    out += "run.seed = " + std::to_string(base_seed) + "\n";
    out += "run.grid = " + join_grid(grid) + "\n";
    out += "run.out = \"" + out_dir + "\"\n";
    return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(resolved_text()); }

}  // namespace onebit
