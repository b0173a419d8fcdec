#ifndef RGACHESS_DOMAIN_HPP
#define RGACHESS_DOMAIN_HPP

// Expert-encoded domain factors: capture on the next move, check on the next
// move, and forced checkmate within a short horizon.

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "chess.hpp"

namespace rgachess {

enum class DomainFactorKind : std::uint8_t { CaptureNextMove = 1, CheckNextMove = 2, MateSoon = 3 };

inline std::string_view name_of(DomainFactorKind k) {
    switch (k) {
        case DomainFactorKind::CaptureNextMove: return "CaptureNextMove";
        case DomainFactorKind::CheckNextMove: return "CheckNextMove";
        case DomainFactorKind::MateSoon: return "MateSoon";
    }
    return "?";
}

struct DomainFactor {
    DomainFactorKind kind = DomainFactorKind::CaptureNextMove;
    std::optional<PieceType> captured;  // CaptureNextMove payload
    std::optional<int> mate_in;         // MateSoon payload, player moves
    bool favorable = true;              // false when the factor works for the opponent

    /// Ordinal band; MateSoon > CheckNextMove > CaptureNextMove.
    [[nodiscard]] int tier() const noexcept { return static_cast<int>(kind); }

    friend bool operator==(const DomainFactor&, const DomainFactor&) = default;
};

inline constexpr int kDefaultMateHorizon = 3;

inline std::optional<DomainFactor> detect_capture_next(const Position& p, const Move& best) {
    auto m = find_legal(p, best);
    if (!m || !m->is_capture()) return std::nullopt;
    const PieceType victim = m->kind == MoveKind::EnPassant ? PieceType::Pawn : p.at(m->to).type;
    return DomainFactor{DomainFactorKind::CaptureNextMove, victim, std::nullopt, true};
}

/// Present when `best` checks without mating; a mate is reported by MateSoon instead.
inline std::optional<DomainFactor> detect_check_next(const Position& p, const Move& best) {
    auto m = find_legal(p, best);
    if (!m) return std::nullopt;
    const Position next = apply_move_unchecked(p, *m);
    if (!next.in_check() || !has_legal_move(next)) return std::nullopt;
    return DomainFactor{DomainFactorKind::CheckNextMove, std::nullopt, std::nullopt, true};
}

namespace detail {

/// Forced-mate prover. A cache keyed by (position, remaining moves) is kept
/// per instance; results do not depend on it.
class MateSearch {
   public:
    /// True when the side to move can force mate in at most `moves` player moves.
    bool mates_within(const Position& p, int moves) {
        if (moves <= 0 || insufficient_material(p)) return false;
        const std::uint64_t key = p.hash() ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(moves));
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        const bool r = search(p, moves);
        cache_.emplace(key, r);
        return r;
    }

   private:
    bool search(const Position& p, int moves) {
        // Checking moves first; mates are usually found among them.
        std::vector<std::pair<Move, Position>> children;
        for (const Move& m : legal_moves(p)) children.emplace_back(m, apply_move_unchecked(p, m));
        std::stable_partition(children.begin(), children.end(), [](const auto& c) { return c.second.in_check(); });

        for (const auto& [m, q] : children) {
            if (moves == 1) {
                if (q.in_check() && !has_legal_move(q)) return true;
                continue;
            }
            const auto replies = legal_moves(q);
            if (replies.empty()) {
                if (q.in_check()) return true;
                continue;  // stalemate
            }
            if (insufficient_material(q)) continue;
            bool forced = true;
            for (const Move& r : replies) {
                if (!mates_within(apply_move_unchecked(q, r), moves - 1)) {
                    forced = false;
                    break;
                }
            }
            if (forced) return true;
        }
        return false;
    }

    std::unordered_map<std::uint64_t, bool> cache_;
};

}  // namespace detail

/// Minimal forced-mate distance (player moves) for the side to move, up to `horizon`.
inline std::optional<int> forced_mate_distance(const Position& p, int horizon) {
    detail::MateSearch search;
    for (int d = 1; d <= horizon; ++d)
        if (search.mates_within(p, d)) return d;
    return std::nullopt;
}

inline std::optional<DomainFactor> detect_mate_within(const Position& p, int horizon = kDefaultMateHorizon) {
    auto d = forced_mate_distance(p, horizon);
    if (!d) return std::nullopt;
    return DomainFactor{DomainFactorKind::MateSoon, std::nullopt, *d, true};
}

/// MateSoon for a specific move: `m` itself mates, or every reply still loses
/// to a forced mate, within `horizon` player moves counting `m`.
inline std::optional<DomainFactor> detect_mate_after(const Position& p, const Move& m, int horizon = kDefaultMateHorizon) {
    auto legal = find_legal(p, m);
    if (!legal || horizon < 1) return std::nullopt;
    const Position next = apply_move_unchecked(p, *legal);
    const auto replies = legal_moves(next);
    if (replies.empty()) {
        if (next.in_check()) return DomainFactor{DomainFactorKind::MateSoon, std::nullopt, 1, true};
        return std::nullopt;
    }
    if (insufficient_material(next)) return std::nullopt;
    detail::MateSearch search;
    for (int d = 1; d < horizon; ++d) {
        bool forced = true;
        for (const Move& r : replies)
            if (!search.mates_within(apply_move_unchecked(next, r), d)) {
                forced = false;
                break;
            }
        if (forced) return DomainFactor{DomainFactorKind::MateSoon, std::nullopt, d + 1, true};
    }
    return std::nullopt;
}

/// The three detectors for the recommended move, ordered by tier (MateSoon first).
/// The mate criterion is evaluated along `best`, so the factor never credits a
/// move that is not itself on a forced-mate line.
inline std::vector<DomainFactor> domain_factors(const Position& p, const Move& best, int horizon = kDefaultMateHorizon) {
    std::vector<DomainFactor> out;
    if (auto f = detect_mate_after(p, best, horizon)) out.push_back(*f);
    if (auto f = detect_check_next(p, best)) out.push_back(*f);
    if (auto f = detect_capture_next(p, best)) out.push_back(*f);
    return out;
}

}  // namespace rgachess

#endif  // RGACHESS_DOMAIN_HPP
