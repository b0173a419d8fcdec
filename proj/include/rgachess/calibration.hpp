#ifndef RGACHESS_CALIBRATION_HPP
#define RGACHESS_CALIBRATION_HPP

// Per-factor Z-score statistics over randomly sampled legal positions.
//
// Samples are nested: stage i of the schedule uses the first schedule[i]
// positions of one seeded stream, so every later stage extends the earlier one
// and the per-stage deltas show how much the statistics still move.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "chess.hpp"
#include "evaluator.hpp"

namespace rgachess {

/// Uniform integer in [0, n) from a 64-bit engine, identical on every platform.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

/// Derives an independent stream seed for item `i` of a seeded batch.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t i) {
    std::uint64_t s = seed ^ (0xD1B54A32D192ED03ULL * (i + 1));
    return detail::splitmix64(s);
}

struct PieceRange {
    int min = 2;
    int max = 32;
};

/// Random legal position with a piece count drawn uniformly from `range`.
/// Pieces come from the standard 32-piece set, so the result is always a
/// plausible material configuration. No castling rights or en passant square.
inline Position random_position(PieceRange range, std::uint64_t seed) {
    if (range.min < 2 || range.max > 32 || range.min > range.max)
        throw std::invalid_argument("random_position: piece range must lie within [2, 32]");
    std::mt19937_64 rng(seed);
    const int count = range.min + static_cast<int>(uniform_below(rng, range.max - range.min + 1));

    static constexpr std::array<PieceType, 15> kPool = {
        PieceType::Pawn, PieceType::Pawn,   PieceType::Pawn,   PieceType::Pawn, PieceType::Pawn,
        PieceType::Pawn, PieceType::Pawn,   PieceType::Pawn,   PieceType::Knight, PieceType::Knight,
        PieceType::Bishop, PieceType::Bishop, PieceType::Rook, PieceType::Rook, PieceType::Queen,
    };

    for (;;) {
        std::vector<Piece> pool;
        for (Color c : {Color::White, Color::Black})
            for (PieceType t : kPool) pool.push_back({c, t});
        // Partial Fisher-Yates: the first count-2 entries are the drawn pieces.
        for (int i = 0; i < count - 2; ++i) {
            const auto j = i + uniform_below(rng, pool.size() - i);
            std::swap(pool[i], pool[j]);
        }

        PositionBuilder b;
        std::uint64_t used = 0;
        auto place = [&](Piece pc) {
            for (;;) {
                Square s = static_cast<Square>(uniform_below(rng, 64));
                if (used & bit(s)) continue;
                if (pc.type == PieceType::Pawn && (rank_of(s) == 0 || rank_of(s) == 7)) continue;
                used |= bit(s);
                b.put(s, pc);
                return;
            }
        };
        place({Color::White, PieceType::King});
        place({Color::Black, PieceType::King});
        for (int i = 0; i < count - 2; ++i) place(pool[i]);
        b.side(uniform_below(rng, 2) ? Color::Black : Color::White);
        if (auto p = b.try_build(); p && has_legal_move(*p)) return *p;
    }
}

struct FactorStats {
    double mean = 0;
    double sd = 0;
    std::size_t count = 0;
    bool sigma_floored = false;

    friend bool operator==(const FactorStats&, const FactorStats&) = default;
};

struct StageDelta {
    std::size_t samples = 0;
    std::map<std::string, double> mean_delta;  // |mu_i - mu_{i-1}|
    std::map<std::string, double> sd_delta;    // |sigma_i - sigma_{i-1}|
    bool converged = false;

    friend bool operator==(const StageDelta&, const StageDelta&) = default;
};

struct CalibrationOptions {
    PieceRange pieces{};
    double sigma_floor = 1e-6;
    /// A stage converges when every |delta| / previous sigma is below this.
    double convergence_threshold = 0.05;
    EvalConfig eval{};
    unsigned threads = 0;  // 0 = hardware concurrency
};

struct CalibrationTable {
    static constexpr int kFormatVersion = 1;

    std::map<std::string, FactorStats> factors;
    std::uint64_t seed = 0;
    std::vector<std::size_t> schedule;
    PieceRange pieces{};
    double sigma_floor = 1e-6;
    double convergence_threshold = 0.05;
    std::vector<StageDelta> deltas;

    [[nodiscard]] const FactorStats& stats(std::string_view name) const {
        auto it = factors.find(std::string(name));
        if (it == factors.end()) throw std::out_of_range("calibration table has no factor '" + std::string(name) + "'");
        return it->second;
    }

    friend bool operator==(const CalibrationTable& a, const CalibrationTable& b) {
        return a.factors == b.factors && a.seed == b.seed && a.schedule == b.schedule && a.pieces.min == b.pieces.min &&
               a.pieces.max == b.pieces.max && a.sigma_floor == b.sigma_floor &&
               a.convergence_threshold == b.convergence_threshold && a.deltas == b.deltas;
    }
};

class CalibrationError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Factor vectors of the first `n` positions of the seeded calibration stream.
inline std::vector<FactorVector> calibration_sample(std::size_t n, std::uint64_t seed, const CalibrationOptions& opt = {}) {
    std::vector<FactorVector> out(n);
    unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            out[i] = compute_factors(random_position(opt.pieces, derive_seed(seed, i)), opt.eval);
    };
    if (threads <= 1) {
        work(0, n);
        return out;
    }
    std::vector<std::future<void>> jobs;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t b = 0; b < n; b += chunk) jobs.push_back(std::async(std::launch::async, work, b, std::min(n, b + chunk)));
    for (auto& j : jobs) j.get();
    return out;
}

namespace detail {

inline std::map<std::string, FactorStats> factor_stats(const std::vector<FactorVector>& sample, std::size_t n,
                                                       double sigma_floor) {
    std::map<std::string, FactorStats> out;
    for (UtilityFactor f : kUtilityFactors) {
        double sum = 0;
        for (std::size_t i = 0; i < n; ++i) sum += static_cast<double>(sample[i][f]);
        const double mean = sum / static_cast<double>(n);
        double ss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = static_cast<double>(sample[i][f]) - mean;
            ss += d * d;
        }
        // Population deviation: the sample z-scored by its own table has sd exactly 1.
        double sd = std::sqrt(ss / static_cast<double>(n));
        const bool floored = sd < sigma_floor;
        if (floored) sd = sigma_floor;
        out[std::string(name_of(f))] = {mean, sd, n, floored};
    }
    return out;
}

}  // namespace detail

inline CalibrationTable calibrate(const std::vector<std::size_t>& schedule, std::uint64_t seed,
                                  const CalibrationOptions& opt = {}) {
    if (schedule.empty()) throw CalibrationError("calibration schedule is empty");
    if (schedule.front() < 2) throw CalibrationError("calibration stages need at least 2 samples");
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (schedule[i] <= schedule[i - 1]) throw CalibrationError("calibration schedule must be strictly increasing");

    const auto sample = calibration_sample(schedule.back(), seed, opt);
    CalibrationTable t;
    t.seed = seed;
    t.schedule = schedule;
    t.pieces = opt.pieces;
    t.sigma_floor = opt.sigma_floor;
    t.convergence_threshold = opt.convergence_threshold;

    auto prev = detail::factor_stats(sample, schedule.front(), opt.sigma_floor);
    for (std::size_t i = 1; i < schedule.size(); ++i) {
        auto cur = detail::factor_stats(sample, schedule[i], opt.sigma_floor);
        StageDelta d;
        d.samples = schedule[i];
        d.converged = true;
        for (const auto& [name, s] : cur) {
            const auto& p = prev.at(name);
            d.mean_delta[name] = std::abs(s.mean - p.mean);
            d.sd_delta[name] = std::abs(s.sd - p.sd);
            const double scale = std::max(p.sd, opt.sigma_floor);
            if (std::max(d.mean_delta[name], d.sd_delta[name]) / scale >= opt.convergence_threshold) d.converged = false;
        }
        t.deltas.push_back(std::move(d));
        prev = std::move(cur);
    }
    t.factors = std::move(prev);
    return t;
}

struct NormalizedFactor {
    std::string name;
    double raw = 0;
    double z = 0;
};

/// Z-scores every factor of `fv` against `t`, in registry order.
inline std::vector<NormalizedFactor> zscore(const FactorVector& fv, const CalibrationTable& t) {
    std::vector<NormalizedFactor> out;
    out.reserve(kUtilityFactorCount);
    for (UtilityFactor f : kUtilityFactors) {
        const std::string name(name_of(f));
        auto it = t.factors.find(name);
        if (it == t.factors.end()) throw CalibrationError("no calibration statistics for factor '" + name + "'");
        const double w = static_cast<double>(fv[f]);
        const double sd = std::max(it->second.sd, t.sigma_floor);
        out.push_back({name, w, (w - it->second.mean) / sd});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence: "key = value" lines, doubles in round-trip precision.

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

}  // namespace detail

inline std::string serialize(const CalibrationTable& t) {
    using detail::format_double;
    std::ostringstream out;
    out << "# rgachess calibration table\n";
    out << "format = rgachess-calibration\n";
    out << "version = " << CalibrationTable::kFormatVersion << "\n";
    out << "seed = " << t.seed << "\n";
    out << "schedule = " << detail::join_sizes(t.schedule) << "\n";
    out << "pieces = " << t.pieces.min << "-" << t.pieces.max << "\n";
    out << "sigma_floor = " << format_double(t.sigma_floor) << "\n";
    out << "convergence_threshold = " << format_double(t.convergence_threshold) << "\n";
    for (const auto& [name, s] : t.factors) {
        out << "factor." << name << ".mean = " << format_double(s.mean) << "\n";
        out << "factor." << name << ".sd = " << format_double(s.sd) << "\n";
        out << "factor." << name << ".n = " << s.count << "\n";
        out << "factor." << name << ".flags = " << (s.sigma_floored ? "sigma-floor" : "none") << "\n";
    }
    for (const auto& d : t.deltas) {
        const std::string prefix = "stage." + std::to_string(d.samples) + ".";
        for (const auto& [name, v] : d.mean_delta) out << prefix << name << ".dmean = " << format_double(v) << "\n";
        for (const auto& [name, v] : d.sd_delta) out << prefix << name << ".dsd = " << format_double(v) << "\n";
        out << prefix << "converged = " << (d.converged ? "true" : "false") << "\n";
    }
    return out.str();
}

inline CalibrationTable parse_calibration(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) throw CalibrationError("calibration line " + std::to_string(lineno) + ": expected 'key = value'");
        kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw CalibrationError("calibration table missing key '" + key + "'");
        return it->second;
    };
    if (get("format") != "rgachess-calibration") throw CalibrationError("not a calibration table");
    if (std::stoi(get("version")) != CalibrationTable::kFormatVersion)
        throw CalibrationError("unsupported calibration table version " + get("version"));

    CalibrationTable t;
    t.seed = std::stoull(get("seed"));
    {
        std::istringstream s(get("schedule"));
        for (std::string part; std::getline(s, part, ',');) t.schedule.push_back(std::stoull(part));
    }
    {
        const std::string& r = get("pieces");
        const auto dash = r.find('-');
        if (dash == std::string::npos) throw CalibrationError("bad pieces range '" + r + "'");
        t.pieces = {std::stoi(r.substr(0, dash)), std::stoi(r.substr(dash + 1))};
    }
    t.sigma_floor = std::strtod(get("sigma_floor").c_str(), nullptr);
    t.convergence_threshold = std::strtod(get("convergence_threshold").c_str(), nullptr);
    for (UtilityFactor f : kUtilityFactors) {
        const std::string p = "factor." + std::string(name_of(f)) + ".";
        FactorStats s;
        s.mean = std::strtod(get(p + "mean").c_str(), nullptr);
        s.sd = std::strtod(get(p + "sd").c_str(), nullptr);
        s.count = std::stoull(get(p + "n"));
        s.sigma_floored = get(p + "flags") == "sigma-floor";
        if (s.sd < 0 || s.count < 2) throw CalibrationError("invalid statistics for factor " + std::string(name_of(f)));
        t.factors[std::string(name_of(f))] = s;
    }
    for (std::size_t i = 1; i < t.schedule.size(); ++i) {
        StageDelta d;
        d.samples = t.schedule[i];
        const std::string p = "stage." + std::to_string(d.samples) + ".";
        for (UtilityFactor f : kUtilityFactors) {
            const std::string n(name_of(f));
            d.mean_delta[n] = std::strtod(get(p + n + ".dmean").c_str(), nullptr);
            d.sd_delta[n] = std::strtod(get(p + n + ".dsd").c_str(), nullptr);
        }
        d.converged = get(p + "converged") == "true";
        t.deltas.push_back(std::move(d));
    }
    return t;
}

inline void save_calibration(const CalibrationTable& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CalibrationError("cannot write calibration table to '" + path + "'");
    out << serialize(t);
    if (!out) throw CalibrationError("failed writing calibration table to '" + path + "'");
}

inline CalibrationTable load_calibration(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CalibrationError("cannot open calibration table '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_calibration(ss.str());
}

}  // namespace rgachess

#endif  // RGACHESS_CALIBRATION_HPP
