#ifndef RGACHESS_EVALUATOR_HPP
#define RGACHESS_EVALUATOR_HPP

// Factor-decomposed static evaluation and fixed-depth alpha-beta ranking.
//
// Every factor is an integer in centipawns, white-relative. The static score is
// the exact sum of the factors, so the evaluation decomposes without residue.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chess.hpp"

namespace rgachess {

enum class UtilityFactor : std::uint8_t {
    Material = 0,
    Mobility,
    KingDanger,
    King,
    Threats,
    HangingPiece,
    Passed,
    PawnPromotion,
};

inline constexpr std::size_t kUtilityFactorCount = 8;

inline constexpr std::array<UtilityFactor, kUtilityFactorCount> kUtilityFactors = {
    UtilityFactor::Material, UtilityFactor::Mobility,     UtilityFactor::KingDanger, UtilityFactor::King,
    UtilityFactor::Threats,  UtilityFactor::HangingPiece, UtilityFactor::Passed,     UtilityFactor::PawnPromotion,
};

inline constexpr std::array<std::string_view, kUtilityFactorCount> kUtilityFactorNames = {
    "Material", "Mobility", "KingDanger", "King", "Threats", "HangingPiece", "Passed", "PawnPromotion",
};

inline std::string_view name_of(UtilityFactor f) { return kUtilityFactorNames[static_cast<std::size_t>(f)]; }

inline std::optional<UtilityFactor> utility_factor_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kUtilityFactorCount; ++i)
        if (kUtilityFactorNames[i] == name) return static_cast<UtilityFactor>(i);
    return std::nullopt;
}

/// Raw factor weights in registry order (centipawns, white-relative).
class FactorVector {
   public:
    using value_type = std::int64_t;

    [[nodiscard]] value_type operator[](UtilityFactor f) const noexcept { return w_[static_cast<std::size_t>(f)]; }
    value_type& operator[](UtilityFactor f) noexcept { return w_[static_cast<std::size_t>(f)]; }

    [[nodiscard]] value_type at(std::string_view name) const {
        auto f = utility_factor_from_name(name);
        if (!f) throw std::out_of_range("unknown factor '" + std::string(name) + "'");
        return (*this)[*f];
    }

    [[nodiscard]] value_type sum() const noexcept {
        value_type s = 0;
        for (auto v : w_) s += v;
        return s;
    }

    [[nodiscard]] const std::array<value_type, kUtilityFactorCount>& values() const noexcept { return w_; }

    friend bool operator==(const FactorVector&, const FactorVector&) = default;

   private:
    std::array<value_type, kUtilityFactorCount> w_{};
};

/// Evaluation constants. Defaults are the documented stand-in weights.
struct EvalConfig {
    std::array<int, 6> piece_value{100, 300, 300, 500, 900, 0};
    int mobility_per_move = 5;
    int king_danger_per_square = -15;
    int king_center_step = 10;
    int threat_per_target = 20;
    int hanging_divisor = 10;
    int passed_base = 20;
    int passed_per_rank = 10;
    int promotion_bonus = 200;

    friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

inline nlohmann::json to_json(const EvalConfig& c) {
    return {
        {"pawn", c.piece_value[0]},
        {"knight", c.piece_value[1]},
        {"bishop", c.piece_value[2]},
        {"rook", c.piece_value[3]},
        {"queen", c.piece_value[4]},
        {"mobility_per_move", c.mobility_per_move},
        {"king_danger_per_square", c.king_danger_per_square},
        {"king_center_step", c.king_center_step},
        {"threat_per_target", c.threat_per_target},
        {"hanging_divisor", c.hanging_divisor},
        {"passed_base", c.passed_base},
        {"passed_per_rank", c.passed_per_rank},
        {"promotion_bonus", c.promotion_bonus},
    };
}

/// Reads a name -> constant table. Missing keys keep their defaults; unknown keys are rejected.
inline EvalConfig eval_config_from_json(const nlohmann::json& j) {
    EvalConfig c;
    auto fields = to_json(c);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!fields.contains(it.key())) throw std::invalid_argument("unknown evaluation constant '" + it.key() + "'");
        if (!it->is_number_integer()) throw std::invalid_argument("evaluation constant '" + it.key() + "' must be an integer");
        fields[it.key()] = *it;
    }
    c.piece_value = {fields["pawn"], fields["knight"], fields["bishop"], fields["rook"], fields["queen"], 0};
    c.mobility_per_move = fields["mobility_per_move"];
    c.king_danger_per_square = fields["king_danger_per_square"];
    c.king_center_step = fields["king_center_step"];
    c.threat_per_target = fields["threat_per_target"];
    c.hanging_divisor = fields["hanging_divisor"];
    if (int(fields["hanging_divisor"]) == 0) throw std::invalid_argument("hanging_divisor must be non-zero");
    c.passed_base = fields["passed_base"];
    c.passed_per_rank = fields["passed_per_rank"];
    c.promotion_bonus = fields["promotion_bonus"];
    return c;
}

inline EvalConfig load_eval_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open evaluation config '" + path + "'");
    return eval_config_from_json(nlohmann::json::parse(in));
}

class EvaluationError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

namespace detail {

// Counts the same move set as pseudo_legal_count() without materializing it.
inline int mobility_count(const Position& p, Color us) {
    const Bitboard own = p.pieces(us), enemy = p.pieces(~us), occ = p.occupied();
    constexpr Bitboard kRank1 = 0xFFULL, kRank8 = 0xFFULL << 56;
    const Bitboard promo_rank = us == Color::White ? kRank8 : kRank1;
    int n = 0;
    for_each_square(p.pieces(us, PieceType::Pawn), [&](Square s) {
        const int push = us == Color::White ? 8 : -8;
        const Square one = s + push;
        if (!(occ & bit(one))) {
            n += (bit(one) & promo_rank) ? 4 : 1;
            const int start = us == Color::White ? 1 : 6;
            if (rank_of(s) == start && !(occ & bit(one + push))) ++n;
        }
        const Bitboard caps = pawn_attacks(us, s) & enemy;
        n += std::popcount(caps & promo_rank) * 4 + std::popcount(caps & ~promo_rank);
    });
    for_each_square(own & ~p.pieces(PieceType::Pawn),
                    [&](Square s) { n += std::popcount(p.attacks_from(s, occ) & ~own); });
    return n;
}

inline int center_distance(Square s) {
    const auto d = [](int x) { return std::max({3 - x, x - 4, 0}); };
    return std::max(d(file_of(s)), d(rank_of(s)));
}

inline bool is_passed(const Position& p, Square s, Color c) {
    const int f = file_of(s), r = rank_of(s);
    const Bitboard enemy_pawns = p.pieces(~c, PieceType::Pawn);
    for (int ff = std::max(0, f - 1); ff <= std::min(7, f + 1); ++ff) {
        if (c == Color::White) {
            for (int rr = r + 1; rr < 8; ++rr)
                if (enemy_pawns & bit(make_square(ff, rr))) return false;
        } else {
            for (int rr = r - 1; rr >= 0; --rr)
                if (enemy_pawns & bit(make_square(ff, rr))) return false;
        }
    }
    return true;
}

}  // namespace detail

/// Static factor decomposition. Defined for every legal position, including
/// terminal ones; callers that need a live game use evaluate().
inline FactorVector compute_factors(const Position& p, const EvalConfig& cfg = {}) {
    FactorVector fv;
    const Bitboard occ = p.occupied();
    std::array<Bitboard, 2> attacks{p.attack_map(Color::White), p.attack_map(Color::Black)};
    std::array<Bitboard, 2> rook_king_attacks{};
    for (Color c : {Color::White, Color::Black}) {
        Bitboard a = king_attacks(p.king_square(c));
        for_each_square(p.pieces(c, PieceType::Rook), [&](Square s) { a |= rook_attacks(s, occ); });
        rook_king_attacks[index(c)] = a;
    }

    for (Color c : {Color::White, Color::Black}) {
        const int sign = c == Color::White ? 1 : -1;
        const Color them = ~c;
        const int ci = index(c), ti = index(them);

        std::int64_t material = 0;
        for (PieceType t : {PieceType::Pawn, PieceType::Knight, PieceType::Bishop, PieceType::Rook, PieceType::Queen})
            material += std::int64_t{cfg.piece_value[index(t)]} * std::popcount(p.pieces(c, t));
        fv[UtilityFactor::Material] += sign * material;

        fv[UtilityFactor::Mobility] += sign * std::int64_t{cfg.mobility_per_move} * detail::mobility_count(p, c);

        const Square k = p.king_square(c);
        const Bitboard zone = king_attacks(k) | bit(k);
        fv[UtilityFactor::KingDanger] += sign * std::int64_t{cfg.king_danger_per_square} * std::popcount(zone & attacks[ti]);

        fv[UtilityFactor::King] += sign * std::int64_t{cfg.king_center_step} * (3 - detail::center_distance(k));

        const Bitboard targets = p.pieces(them) & ~p.pieces(PieceType::King);
        fv[UtilityFactor::Threats] += sign * std::int64_t{cfg.threat_per_target} * std::popcount(targets & rook_king_attacks[ci]);

        std::int64_t hanging = 0;
        for_each_square(targets & attacks[ci] & ~attacks[ti],
                        [&](Square s) { hanging += cfg.piece_value[index(p.at(s).type)] / cfg.hanging_divisor; });
        fv[UtilityFactor::HangingPiece] += sign * hanging;

        std::int64_t passed = 0, promotion = 0;
        for_each_square(p.pieces(c, PieceType::Pawn), [&](Square s) {
            const int rel_rank = (c == Color::White ? rank_of(s) : 7 - rank_of(s)) + 1;
            if (detail::is_passed(p, s, c)) passed += cfg.passed_base + cfg.passed_per_rank * (rel_rank - 2);
            if (rel_rank == 7) promotion += cfg.promotion_bonus;
        });
        fv[UtilityFactor::Passed] += sign * passed;
        fv[UtilityFactor::PawnPromotion] += sign * promotion;
    }
    return fv;
}

struct Evaluation {
    std::int64_t score = 0;  // white-relative centipawns
    FactorVector factors;
};

/// Static evaluation of a live position. Throws EvaluationError on checkmate or stalemate.
inline Evaluation evaluate(const Position& p, const EvalConfig& cfg = {}) {
    if (!has_legal_move(p)) throw EvaluationError("cannot evaluate a terminal position: " + to_fen(p));
    Evaluation e;
    e.factors = compute_factors(p, cfg);
    e.score = e.factors.sum();
    return e;
}

// ---------------------------------------------------------------------------
// Search

inline constexpr int kMateBase = 1'000'000;
inline constexpr int kMaxPly = 256;
inline constexpr int kInfinity = std::numeric_limits<int>::max() / 2;

[[nodiscard]] constexpr bool is_mate_score(int score) noexcept {
    return score >= kMateBase - kMaxPly || score <= -(kMateBase - kMaxPly);
}

/// Signed mate distance in player moves for a root-relative score, if any.
/// Positive: the mover mates; negative: the mover gets mated.
[[nodiscard]] inline std::optional<int> mate_distance(int score) noexcept {
    if (score >= kMateBase - kMaxPly) return (kMateBase - score + 1) / 2;
    if (score <= -(kMateBase - kMaxPly)) return -((kMateBase + score) / 2);
    return std::nullopt;
}

struct ScoredMove {
    Move move;
    int score = 0;                 // centipawns from the root mover's perspective
    std::optional<int> mate;       // signed player-move distance
    double rank = 0;               // 1-based ascending mid-rank

    friend bool operator==(const ScoredMove&, const ScoredMove&) = default;
};

namespace detail {

struct TTEntry {
    std::uint64_t key = 0;
    int score = 0;
    std::int16_t depth = -1;
    std::uint8_t bound = 0;  // 0 exact, 1 lower, 2 upper
    Move best{};
};

/// Per-call search state. Table entries are reused only at identical
/// remaining depth, so pruned search reproduces plain minimax values.
class Searcher {
   public:
    explicit Searcher(const EvalConfig& cfg) : cfg_(cfg), table_(std::size_t{1} << 16) {}

    int negamax(const Position& p, int depth, int alpha, int beta, int ply) {
        ++nodes_;
        const auto moves = legal_moves(p);
        if (moves.empty()) return p.in_check() ? -(kMateBase - ply) : 0;
        if (insufficient_material(p)) return 0;
        if (depth == 0) {
            const auto s = static_cast<int>(compute_factors(p, cfg_).sum());
            return p.side_to_move() == Color::White ? s : -s;
        }

        const std::uint64_t key = p.hash();
        TTEntry& slot = table_[key & (table_.size() - 1)];
        Move tt_move{-1, -1};
        if (slot.key == key && slot.depth == depth) {
            const int s = from_tt(slot.score, ply);
            if (slot.bound == 0) return s;
            if (slot.bound == 1 && s >= beta) return s;
            if (slot.bound == 2 && s <= alpha) return s;
            tt_move = slot.best;
        } else if (slot.key == key) {
            tt_move = slot.best;
        }

        auto ordered = order(p, moves, tt_move);
        const int alpha0 = alpha;
        int best = -kInfinity;
        Move best_move = ordered.front();
        for (const Move& m : ordered) {
            const int s = -negamax(apply_move_unchecked(p, m), depth - 1, -beta, -alpha, ply + 1);
            if (s > best) {
                best = s;
                best_move = m;
            }
            alpha = std::max(alpha, s);
            if (alpha >= beta) break;
        }
        slot.key = key;
        slot.depth = static_cast<std::int16_t>(depth);
        slot.score = to_tt(best, ply);
        slot.bound = best <= alpha0 ? 2 : best >= beta ? 1 : 0;
        slot.best = best_move;
        return best;
    }

    [[nodiscard]] std::uint64_t nodes() const noexcept { return nodes_; }

   private:
    static int to_tt(int s, int ply) {
        if (s >= kMateBase - kMaxPly) return s + ply;
        if (s <= -(kMateBase - kMaxPly)) return s - ply;
        return s;
    }
    static int from_tt(int s, int ply) {
        if (s >= kMateBase - kMaxPly) return s - ply;
        if (s <= -(kMateBase - kMaxPly)) return s + ply;
        return s;
    }

    std::vector<Move> order(const Position& p, const std::vector<Move>& moves, const Move& tt_move) const {
        std::vector<std::pair<int, Move>> keyed;
        keyed.reserve(moves.size());
        for (const Move& m : moves) {
            int k = 0;
            if (m == tt_move) k = 1 << 20;
            else if (m.is_capture()) {
                const PieceType victim = m.kind == MoveKind::EnPassant ? PieceType::Pawn : p.at(m.to).type;
                k = 10000 + cfg_.piece_value[index(victim)] * 10 - index(p.at(m.from).type);
            }
            if (m.is_promotion()) k += 5000 + index(m.promotion);
            keyed.emplace_back(k, m);
        }
        std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<Move> out;
        out.reserve(keyed.size());
        for (auto& [k, m] : keyed) out.push_back(m);
        return out;
    }

    const EvalConfig& cfg_;
    std::vector<TTEntry> table_;
    std::uint64_t nodes_ = 0;
};

}  // namespace detail

/// Fixed-depth negamax value of `p` from the side to move's perspective.
inline int search_value(const Position& p, int depth, const EvalConfig& cfg = {}) {
    detail::Searcher s(cfg);
    return s.negamax(p, depth, -kInfinity, kInfinity, 0);
}

/// Assigns 1-based mid-ranks to a list already sorted by ascending score.
inline void assign_mid_ranks(std::vector<ScoredMove>& ranked) {
    std::size_t i = 0;
    while (i < ranked.size()) {
        std::size_t j = i;
        while (j + 1 < ranked.size() && ranked[j + 1].score == ranked[i].score) ++j;
        const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranked[t].rank = mid;
        i = j + 1;
    }
}

/// Sorts ascending by score, ties by long algebraic text, and assigns mid-ranks.
inline void finalize_ranking(std::vector<ScoredMove>& ranked) {
    std::sort(ranked.begin(), ranked.end(), [](const ScoredMove& a, const ScoredMove& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.move.uci() < b.move.uci();
    });
    assign_mid_ranks(ranked);
}

/// Scores every legal move by a full-window search of the child at depth - 1.
/// The result is ascending; the last element is the best move.
inline std::vector<ScoredMove> rank_moves(const Position& p, int depth, const EvalConfig& cfg = {}) {
    if (depth < 1) throw std::invalid_argument("rank_moves: depth must be at least 1");
    const auto moves = legal_moves(p);
    if (moves.empty()) throw EvaluationError("cannot rank moves of a terminal position: " + to_fen(p));
    detail::Searcher searcher(cfg);
    std::vector<ScoredMove> ranked;
    ranked.reserve(moves.size());
    for (const Move& m : moves) {
        const int s = -searcher.negamax(apply_move_unchecked(p, m), depth - 1, -kInfinity, kInfinity, 1);
        ranked.push_back({m, s, mate_distance(s), 0});
    }
    finalize_ranking(ranked);
    return ranked;
}

inline ScoredMove best_move(const Position& p, int depth, const EvalConfig& cfg = {}) {
    return rank_moves(p, depth, cfg).back();
}

/// The move best_move would return, found with one shrinking root window.
/// Moves are tried in descending text order and replaced only on a strictly
/// better score, which reproduces the ranking's tie-break.
inline Move choose_move(const Position& p, int depth, const EvalConfig& cfg = {}) {
    if (depth < 1) throw std::invalid_argument("choose_move: depth must be at least 1");
    auto moves = legal_moves(p);
    if (moves.empty()) throw EvaluationError("cannot choose a move in a terminal position: " + to_fen(p));
    std::sort(moves.begin(), moves.end(), [](const Move& a, const Move& b) { return a.uci() > b.uci(); });
    detail::Searcher searcher(cfg);
    Move best = moves.front();
    int best_score = -kInfinity;
    for (const Move& m : moves) {
        const int s = -searcher.negamax(apply_move_unchecked(p, m), depth - 1, -kInfinity, -best_score, 1);
        if (s > best_score) {
            best_score = s;
            best = m;
        }
    }
    return best;
}

}  // namespace rgachess

#endif  // RGACHESS_EVALUATOR_HPP
