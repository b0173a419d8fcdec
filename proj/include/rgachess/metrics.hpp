#ifndef RGACHESS_METRICS_HPP
#define RGACHESS_METRICS_HPP

// Study metrics: win percentage over game outcomes and percentile rank of a
// chosen move within a ranked move list.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evaluator.hpp"

namespace rgachess {

enum class Outcome { Ongoing, Win, Loss, Tie, MaxMoves };

inline std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::Ongoing: return "ongoing";
        case Outcome::Win: return "win";
        case Outcome::Loss: return "loss";
        case Outcome::Tie: return "tie";
        case Outcome::MaxMoves: return "maxmoves";
    }
    return "?";
}

inline Outcome outcome_from_string(const std::string& s) {
    for (Outcome o : {Outcome::Ongoing, Outcome::Win, Outcome::Loss, Outcome::Tie, Outcome::MaxMoves})
        if (to_string(o) == s) return o;
    throw std::invalid_argument("unknown outcome '" + s + "'");
}

struct OutcomeCounts {
    std::uint64_t wins = 0;
    std::uint64_t ties = 0;
    std::uint64_t losses = 0;
    std::uint64_t maxmoves = 0;

    [[nodiscard]] std::uint64_t total() const noexcept { return wins + ties + losses + maxmoves; }

    void add(Outcome o) {
        switch (o) {
            case Outcome::Win: ++wins; break;
            case Outcome::Tie: ++ties; break;
            case Outcome::Loss: ++losses; break;
            case Outcome::MaxMoves: ++maxmoves; break;
            case Outcome::Ongoing: throw std::invalid_argument("cannot score an unfinished game");
        }
    }
};

class MetricError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// 100 * (wins + ties/2 + maxmoves/2) / games. The numerator and denominator
/// are kept as doubled integers so the only rounding is the final division.
inline double win_percentage(const OutcomeCounts& c) {
    if (c.total() == 0) throw MetricError("win percentage of an empty record set");
    const std::uint64_t num = 2 * c.wins + c.ties + c.maxmoves;
    const std::uint64_t den = 2 * c.total();
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

inline double win_percentage(std::span<const Outcome> outcomes) {
    OutcomeCounts c;
    for (Outcome o : outcomes) c.add(o);
    return win_percentage(c);
}

/// 100 * (k - 1) / (N - 1) with k the mid-rank of `chosen`; N == 1 gives 100.
inline double percentile_rank(const std::vector<ScoredMove>& ranking, const Move& chosen) {
    for (const ScoredMove& s : ranking) {
        if (!(s.move == chosen)) continue;
        if (ranking.size() == 1) return 100.0;
        return 100.0 * (s.rank - 1.0) / static_cast<double>(ranking.size() - 1);
    }
    throw MetricError("move " + chosen.uci() + " is not in the ranking");
}

}  // namespace rgachess

#endif  // RGACHESS_METRICS_HPP
