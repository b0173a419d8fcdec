#ifndef RGACHESS_RGA_HPP
#define RGACHESS_RGA_HPP

// Rationale generation: decompose the engine utility into Z-scored factors,
// merge expert domain factors above them, keep the top k, and render each
// through a positive or negative sentence template.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "calibration.hpp"
#include "chess.hpp"
#include "domain.hpp"
#include "evaluator.hpp"
#include "metrics.hpp"

namespace rgachess {

enum class FactorSource { Utility, Domain };

struct Factor {
    std::string name;
    double weight = 0;  // perspective z-score (utility) or tier band (domain)
    bool positive = true;
    FactorSource source = FactorSource::Utility;
    int tier = 0;
    std::optional<int> mate_in;
    std::optional<PieceType> piece;

    friend bool operator==(const Factor&, const Factor&) = default;
};

/// Total order for merged factors: every domain factor (higher tier first)
/// precedes every utility factor (larger |z| first); names break ties.
inline bool ranks_before(const Factor& a, const Factor& b) {
    if (a.source != b.source) return a.source == FactorSource::Domain;
    if (a.source == FactorSource::Domain) {
        if (a.tier != b.tier) return a.tier > b.tier;
    } else {
        const double wa = std::abs(a.weight), wb = std::abs(b.weight);
        if (wa != wb) return wa > wb;
    }
    return a.name < b.name;
}

class TemplateError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Versioned (factor, polarity) -> sentence map with {move}, {n}, {piece} slots.
class TemplateRegistry {
   public:
    static TemplateRegistry parse(const std::string& text) {
        TemplateRegistry r;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find(" = ");
            if (eq == std::string::npos)
                throw TemplateError("template line " + std::to_string(lineno) + ": expected 'key = text'");
            const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
            if (key == "version") {
                r.version_ = value;
                continue;
            }
            if (key.size() < 2 || (key.back() != '+' && key.back() != '-'))
                throw TemplateError("template line " + std::to_string(lineno) + ": key must end in '+' or '-'");
            r.templates_[key] = value;
        }
        if (r.version_.empty()) throw TemplateError("template registry has no version");
        return r;
    }

    static TemplateRegistry load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw TemplateError("cannot open template registry '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    /// Built-in registry; identical to data/templates.txt.
    static const TemplateRegistry& builtin();

    [[nodiscard]] const std::string& version() const noexcept { return version_; }

    [[nodiscard]] bool has(const std::string& name, bool positive) const {
        return templates_.count(name + (positive ? "+" : "-")) != 0;
    }

    [[nodiscard]] std::string render(const std::string& name, bool positive, const std::string& move,
                                     std::optional<int> n = std::nullopt,
                                     std::optional<PieceType> piece = std::nullopt) const {
        const std::string key = name + (positive ? "+" : "-");
        auto it = templates_.find(key);
        if (it == templates_.end()) throw TemplateError("no template for '" + key + "'");
        std::string out;
        const std::string& t = it->second;
        for (std::size_t i = 0; i < t.size();) {
            if (t[i] == '{') {
                const auto close = t.find('}', i);
                if (close == std::string::npos) throw TemplateError("unterminated slot in '" + key + "'");
                const std::string slot = t.substr(i + 1, close - i - 1);
                if (slot == "move")
                    out += move;
                else if (slot == "n")
                    out += n ? std::to_string(*n) : "?";
                else if (slot == "piece")
                    out += piece ? piece_name(*piece) : "piece";
                else
                    throw TemplateError("unknown slot '{" + slot + "}' in '" + key + "'");
                i = close + 1;
            } else {
                out += t[i++];
            }
        }
        return out;
    }

    friend bool operator==(const TemplateRegistry&, const TemplateRegistry&) = default;

   private:
    std::string version_;
    std::map<std::string, std::string> templates_;
};

inline const TemplateRegistry& TemplateRegistry::builtin() {
    static const TemplateRegistry r = parse(R"(version = 1
Material+ = {move} keeps you ahead in material.
Material- = {move} leaves you behind in material.
Mobility+ = {move} gives your pieces more room to move than your opponent's.
Mobility- = {move} leaves your pieces with fewer moves than your opponent's.
KingDanger+ = {move} keeps the squares around your king safe while the enemy king is under pressure.
KingDanger- = {move} lets enemy pieces attack the squares around your king.
King+ = {move} keeps your king active near the center of the board.
King- = {move} leaves your king stuck near the edge while the enemy king is more active.
Threats+ = {move} lets your rook or king attack enemy pieces.
Threats- = {move} lets the enemy rook or king attack your pieces.
HangingPiece+ = {move} leaves an enemy piece undefended where you can capture it.
HangingPiece- = {move} leaves a piece undefended where it can be captured.
Passed+ = {move} helps your passed pawn advance safely toward promotion.
Passed- = {move} lets an enemy passed pawn advance toward promotion.
PawnPromotion+ = {move} pushes your pawn toward promotion; a new queen is within reach.
PawnPromotion- = {move} lets an enemy pawn get close to promoting.
MateSoon+ = {move} leads to checkmate in {n} move(s).
MateSoon- = {move} allows your opponent to force checkmate in {n} move(s).
CheckNextMove+ = {move} puts the enemy king in check.
CheckNextMove- = {move} lets your opponent put your king in check.
CaptureNextMove+ = {move} captures a {piece}.
CaptureNextMove- = {move} lets your opponent capture your {piece}.
Fallback- = {move} is among the weakest moves available here.
)");
    return r;
}

struct RGAConfig {
    int k = 2;
    std::string template_version = "1";
    double cautionary_threshold = 100.0 / 3.0;
    int mate_horizon = kDefaultMateHorizon;
};

enum class Polarity { BestMove, Cautionary };
enum class Variant { RGA, RGAPlus };

inline std::string to_string(Polarity p) { return p == Polarity::BestMove ? "best-move" : "cautionary"; }
inline std::string to_string(Variant v) { return v == Variant::RGA ? "rga" : "rga+"; }

struct Rationale {
    Polarity polarity = Polarity::BestMove;
    Variant variant = Variant::RGA;
    std::string move_san;
    std::string move_uci;
    std::vector<Factor> factors;
    std::vector<std::string> lines;
    std::string template_version;

    friend bool operator==(const Rationale&, const Rationale&) = default;
};

/// Z-scored utility factors seen from `perspective`. Scores are computed on
/// white-relative weights and negated for black; zero counts as positive.
inline std::vector<Factor> decompose_utility(const FactorVector& fv, const CalibrationTable& t, Color perspective) {
    std::vector<Factor> out;
    const double sign = perspective == Color::White ? 1.0 : -1.0;
    for (const auto& nf : zscore(fv, t)) {
        Factor f;
        f.name = nf.name;
        f.weight = sign * nf.z;
        if (f.weight == 0.0) f.weight = 0.0;  // no negative zero
        f.positive = f.weight >= 0.0;
        f.source = FactorSource::Utility;
        out.push_back(std::move(f));
    }
    return out;
}

inline Factor to_factor(const DomainFactor& d) {
    Factor f;
    f.name = std::string(name_of(d.kind));
    f.weight = d.tier();
    f.positive = d.favorable;
    f.source = FactorSource::Domain;
    f.tier = d.tier();
    f.mate_in = d.mate_in;
    f.piece = d.captured;
    return f;
}

inline std::vector<Factor> merge_and_rank(const std::vector<Factor>& util, const std::vector<Factor>& dom) {
    std::vector<Factor> all;
    all.reserve(util.size() + dom.size());
    all.insert(all.end(), dom.begin(), dom.end());
    all.insert(all.end(), util.begin(), util.end());
    std::stable_sort(all.begin(), all.end(), ranks_before);
    return all;
}

inline std::vector<Factor> top_k(std::vector<Factor> ranked, int k) {
    if (k < 1) throw std::invalid_argument("RGA top-k requires k >= 1");
    if (ranked.size() > static_cast<std::size_t>(k)) ranked.resize(static_cast<std::size_t>(k));
    return ranked;
}

namespace detail {

inline void render_lines(Rationale& r, const TemplateRegistry& reg) {
    for (const Factor& f : r.factors) r.lines.push_back(reg.render(f.name, f.positive, r.move_san, f.mate_in, f.piece));
}

inline void check_registry(const RGAConfig& cfg, const TemplateRegistry& reg) {
    if (!cfg.template_version.empty() && cfg.template_version != reg.version())
        throw TemplateError("template registry version " + reg.version() + " does not match configured version " +
                            cfg.template_version);
}

}  // namespace detail

/// Best-move rationale for `a` in `p` from utility factors `u` and, when
/// present, domain factors `d` (RGA+). The mover is `p`'s side to move.
inline Rationale generate_rationale(const FactorVector& u, const Move& a, const std::optional<std::vector<DomainFactor>>& d,
                                    const RGAConfig& cfg, const CalibrationTable& t, const Position& p,
                                    const TemplateRegistry& reg = TemplateRegistry::builtin()) {
    detail::check_registry(cfg, reg);
    Rationale r;
    r.polarity = Polarity::BestMove;
    r.variant = d ? Variant::RGAPlus : Variant::RGA;
    r.move_san = to_san(p, a);
    r.move_uci = a.uci();
    r.template_version = reg.version();

    std::vector<Factor> dom;
    if (d)
        for (const DomainFactor& df : *d) dom.push_back(to_factor(df));
    r.factors = top_k(merge_and_rank(decompose_utility(u, t, p.side_to_move()), dom), cfg.k);
    detail::render_lines(r, reg);
    return r;
}

/// Best-move rationale with factors read off the position `best` creates;
/// RGA+ adds the domain detectors for `best`.
inline Rationale explain_best_move(const Position& p, const Move& best, Variant variant, const RGAConfig& cfg,
                                   const CalibrationTable& t, const EvalConfig& eval = {},
                                   const TemplateRegistry& reg = TemplateRegistry::builtin()) {
    const FactorVector u = compute_factors(apply_move(p, best), eval);
    std::optional<std::vector<DomainFactor>> d;
    if (variant == Variant::RGAPlus) d = domain_factors(p, best, cfg.mate_horizon);
    return generate_rationale(u, best, d, cfg, t, p, reg);
}

struct CautionTrigger {
    double percentile = 0;
};

/// Fires when the proposal's percentile rank falls below the configured threshold.
inline std::optional<CautionTrigger> detect_non_optimal(const std::vector<ScoredMove>& ranking, const Move& proposed,
                                                        const RGAConfig& cfg) {
    const double pr = percentile_rank(ranking, proposed);
    if (pr < cfg.cautionary_threshold) return CautionTrigger{pr};
    return std::nullopt;
}

struct CautionOptions {
    bool use_domain = false;  // RGA+ adds an opponent-mate warning
    EvalConfig eval{};
};

/// Cautionary rationale for `proposed`: the top-k factors that work against
/// the mover in the position the move creates.
inline Rationale generate_cautionary(const Position& p, const Move& proposed, const RGAConfig& cfg,
                                     const CalibrationTable& t, const CautionOptions& opt = {},
                                     const TemplateRegistry& reg = TemplateRegistry::builtin()) {
    detail::check_registry(cfg, reg);
    Rationale r;
    r.polarity = Polarity::Cautionary;
    r.variant = opt.use_domain ? Variant::RGAPlus : Variant::RGA;
    r.move_san = to_san(p, proposed);
    r.move_uci = proposed.uci();
    r.template_version = reg.version();

    const Position after = apply_move(p, proposed);
    std::vector<Factor> against;
    for (Factor& f : decompose_utility(compute_factors(after, opt.eval), t, p.side_to_move()))
        if (!f.positive) against.push_back(std::move(f));

    std::vector<Factor> dom;
    if (opt.use_domain && has_legal_move(after)) {
        if (auto mate = detect_mate_within(after, cfg.mate_horizon)) {
            mate->favorable = false;
            dom.push_back(to_factor(*mate));
        }
    }
    r.factors = top_k(merge_and_rank(against, dom), cfg.k);
    detail::render_lines(r, reg);
    if (r.lines.empty()) r.lines.push_back(reg.render("Fallback", false, r.move_san));
    return r;
}

}  // namespace rgachess

#endif  // RGACHESS_RGA_HPP
