#ifndef RGACHESS_STUDY_HPP
#define RGACHESS_STUDY_HPP

// Study harness: board corpus, four-condition sessions of nine games against
// a searching opponent, two-phase move submission with cautions, an append-only
// JSON event log that replays to the same state, and scripted agents.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "calibration.hpp"
#include "chess.hpp"
#include "domain.hpp"
#include "evaluator.hpp"
#include "metrics.hpp"
#include "rga.hpp"

namespace rgachess {

enum class Condition { None, Hints, RGA, RGAPlus };

inline std::string to_string(Condition c) {
    switch (c) {
        case Condition::None: return "none";
        case Condition::Hints: return "hints";
        case Condition::RGA: return "rga";
        case Condition::RGAPlus: return "rga+";
    }
    return "?";
}

inline std::optional<Condition> condition_from_string(std::string_view s) {
    for (Condition c : {Condition::None, Condition::Hints, Condition::RGA, Condition::RGAPlus})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

enum class Phase { Diagnostic, Instructional };

inline std::string to_string(Phase p) { return p == Phase::Diagnostic ? "diagnostic" : "instructional"; }

inline constexpr int kGamesPerDay = 9;
inline constexpr int kStudyDays = 3;

/// Slots 4-6 (1-based) of each day are instructional.
constexpr Phase phase_of_game(int game) noexcept { return game >= 3 && game < 6 ? Phase::Instructional : Phase::Diagnostic; }

// ---------------------------------------------------------------------------
// Corpus

struct BoardTask {
    std::string fen;
    int optimal_moves = 0;  // forced-mate distance for white, in player moves
    std::size_t ordinal = 0;

    friend bool operator==(const BoardTask&, const BoardTask&) = default;
};

class CorpusError : public std::runtime_error {
   public:
    CorpusError(int line, const std::string& what)
        : std::runtime_error("corpus line " + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] int line() const noexcept { return line_; }

   private:
    int line_;
};

inline constexpr int kMaxBoardPieces = 12;
inline constexpr int kMaxOptimalMoves = 4;

/// One FEN per line with an optional "; O=n" annotation; '#' starts a comment.
/// Every board must be a legal white-to-move position with at most 12 pieces
/// and a forced mate in fewer than 5 moves; an annotated O must match the search.
inline std::vector<BoardTask> parse_corpus(const std::string& text) {
    std::vector<BoardTask> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        std::string fen = line, note;
        if (auto semi = line.find(';'); semi != std::string::npos) {
            fen = line.substr(0, semi);
            note = line.substr(semi + 1);
        }
        std::optional<int> annotated;
        if (auto o = note.find("O="); o != std::string::npos) {
            try {
                annotated = std::stoi(note.substr(o + 2));
            } catch (const std::exception&) {
                throw CorpusError(lineno, "bad O annotation '" + note + "'");
            }
        } else if (note.find_first_not_of(" \t\r") != std::string::npos) {
            throw CorpusError(lineno, "unrecognized annotation '" + note + "'");
        }

        Position p;
        try {
            p = parse_fen(fen);
        } catch (const FenError& e) {
            throw CorpusError(lineno, e.what());
        }
        if (p.side_to_move() != Color::White) throw CorpusError(lineno, "board must have white to move");
        if (p.piece_count() > kMaxBoardPieces)
            throw CorpusError(lineno, "board has " + std::to_string(p.piece_count()) + " pieces (limit 12)");
        if (annotated && (*annotated < 1 || *annotated > kMaxOptimalMoves))
            throw CorpusError(lineno, "O must lie in 1..4");
        const auto mate = forced_mate_distance(p, annotated.value_or(kMaxOptimalMoves));
        if (!mate) throw CorpusError(lineno, "no forced mate within " + std::to_string(annotated.value_or(kMaxOptimalMoves)) + " moves");
        if (annotated && *mate != *annotated)
            throw CorpusError(lineno, "annotated O=" + std::to_string(*annotated) + " but search finds " + std::to_string(*mate));
        out.push_back({to_fen(p), *mate, out.size()});
    }
    return out;
}

inline std::vector<BoardTask> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_corpus(ss.str());
}

inline std::string serialize_corpus(const std::vector<BoardTask>& boards) {
    std::string out;
    for (const auto& b : boards) out += b.fen + " ; O=" + std::to_string(b.optimal_moves) + "\n";
    return out;
}

struct BoardGenOptions {
    PieceRange pieces{6, kMaxBoardPieces};
    int max_mate = 3;
    /// When set, keep only boards on which always playing the top-ranked move
    /// at this hint depth wins against the opponent depth, with a strictly
    /// best move at every turn.
    std::optional<std::pair<int, int>> hint_line;
    int max_player_moves = 10;
    EvalConfig eval{};
};

namespace detail {

inline bool hint_line_wins(Position p, int hint_depth, int opponent_depth, int cap, const EvalConfig& cfg) {
    for (int turn = 0; turn < cap; ++turn) {
        const auto r = rank_moves(p, hint_depth, cfg);
        if (r.size() > 1 && r[r.size() - 2].score == r.back().score) return false;
        p = apply_move(p, r.back().move);
        if (game_status(p).kind == GameStatusKind::Checkmate) return true;
        if (!has_legal_move(p) || insufficient_material(p)) return false;
        p = apply_move(p, choose_move(p, opponent_depth, cfg));
        if (!has_legal_move(p) || insufficient_material(p)) return false;
    }
    return false;
}

}  // namespace detail

/// Seeded random forced-win boards for white.
inline std::vector<BoardTask> generate_boards(std::size_t count, std::uint64_t seed, const BoardGenOptions& opt = {}) {
    if (opt.pieces.max > kMaxBoardPieces) throw std::invalid_argument("boards may hold at most 12 pieces");
    if (opt.max_mate < 1 || opt.max_mate > kMaxOptimalMoves) throw std::invalid_argument("max_mate must lie in 1..4");
    std::vector<BoardTask> out;
    for (std::uint64_t i = 0; out.size() < count; ++i) {
        const Position p = random_position(opt.pieces, derive_seed(seed, i));
        if (p.side_to_move() != Color::White) continue;
        const auto mate = forced_mate_distance(p, opt.max_mate);
        if (!mate) continue;
        if (opt.hint_line &&
            !detail::hint_line_wins(p, opt.hint_line->first, opt.hint_line->second, opt.max_player_moves, opt.eval))
            continue;
        out.push_back({to_fen(p), *mate, out.size()});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sessions

/// Move ranking and opponent choice. The internal evaluator is the default;
/// an external engine can be plugged in with the same contract.
struct SearchBackend {
    std::function<std::vector<ScoredMove>(const Position&, int)> rank;
    std::function<Move(const Position&, int)> choose;

    static SearchBackend internal(const EvalConfig& cfg = {}) {
        return {[cfg](const Position& p, int d) { return rank_moves(p, d, cfg); },
                [cfg](const Position& p, int d) { return choose_move(p, d, cfg); }};
    }
};

struct StudyConfig {
    int hint_depth = 4;
    int opponent_depth = 6;
    int max_player_moves = 10;
    RGAConfig rga{};
    EvalConfig eval{};
};

struct Guidance {
    std::optional<Move> highlight;
    std::string highlight_san;
    std::optional<Rationale> rationale;

    [[nodiscard]] bool empty() const noexcept { return !highlight && !rationale; }
    friend bool operator==(const Guidance&, const Guidance&) = default;
};

/// Result of one submission. Uncommitted results carry the caution that
/// stopped the move; committed ones carry the reply and the new game state.
struct TurnOutcome {
    bool committed = false;
    int game = 0;  // 0-based slot
    int turn = 0;  // 1-based player move number
    Move move{};
    std::string san;
    double percentile = 0;
    std::optional<Rationale> caution;
    std::optional<Move> reply;
    std::string reply_san;
    Outcome outcome = Outcome::Ongoing;
    std::string fen;  // position after the turn

    friend bool operator==(const TurnOutcome&, const TurnOutcome&) = default;
};

struct GameRecord {
    std::size_t board = 0;  // corpus ordinal
    Phase phase = Phase::Diagnostic;
    std::string start_fen;
    Position position;
    std::vector<TurnOutcome> turns;  // committed turns only
    Outcome outcome = Outcome::Ongoing;

    [[nodiscard]] int player_moves() const noexcept { return static_cast<int>(turns.size()); }
};

struct Session {
    std::string id;
    std::string participant;
    Condition condition = Condition::None;
    int day = 1;
    std::vector<GameRecord> games;
    int current_game = 0;  // == 9 once every game is over
    std::optional<int> questionnaire;
    Guidance guidance;                   // for the current turn
    std::optional<TurnOutcome> pending;  // cautioned proposal awaiting confirmation
    std::vector<std::string> log;        // one JSON record per line
    std::uint64_t next_seq = 1;

    [[nodiscard]] bool finished() const noexcept { return current_game >= kGamesPerDay; }
};

class StudyError : public std::runtime_error {
   public:
    enum class Kind { BadRequest, NotFound, Conflict };
    StudyError(Kind kind, std::string code, const std::string& message)
        : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}
    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::string& code() const noexcept { return code_; }

   private:
    Kind kind_;
    std::string code_;
};

namespace detail {

inline nlohmann::json rationale_json(const Rationale& r) {
    nlohmann::json factors = nlohmann::json::array();
    for (const auto& f : r.factors)
        factors.push_back({{"name", f.name},
                           {"weight", f.weight},
                           {"positive", f.positive},
                           {"source", f.source == FactorSource::Domain ? "domain" : "utility"}});
    return {{"polarity", to_string(r.polarity)}, {"variant", to_string(r.variant)}, {"move", r.move_san},
            {"lines", r.lines},                  {"factors", factors},              {"template_version", r.template_version}};
}

}  // namespace detail

inline nlohmann::json to_json(const Rationale& r) { return detail::rationale_json(r); }

inline nlohmann::json to_json(const Guidance& g) {
    nlohmann::json j;
    j["highlight"] = g.highlight ? nlohmann::json(g.highlight->uci()) : nlohmann::json(nullptr);
    j["highlight_san"] = g.highlight ? nlohmann::json(g.highlight_san) : nlohmann::json(nullptr);
    j["rationale"] = g.rationale ? to_json(*g.rationale) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json to_json(const TurnOutcome& t) {
    return {{"committed", t.committed},
            {"game", t.game},
            {"turn", t.turn},
            {"move", t.move.uci()},
            {"san", t.san},
            {"percentile", t.percentile},
            {"caution", t.caution ? to_json(*t.caution) : nlohmann::json(nullptr)},
            {"reply", t.reply ? nlohmann::json(t.reply->uci()) : nlohmann::json(nullptr)},
            {"reply_san", t.reply ? nlohmann::json(t.reply_san) : nlohmann::json(nullptr)},
            {"outcome", to_string(t.outcome)},
            {"fen", t.fen}};
}

/// Owns the corpus, calibration table and configuration shared by every
/// session. Methods take the session explicitly; callers serialize access to
/// any one session.
class Study {
   public:
    Study(std::vector<BoardTask> corpus, CalibrationTable table, StudyConfig cfg = {},
          SearchBackend backend = SearchBackend::internal(),
          const TemplateRegistry& templates = TemplateRegistry::builtin())
        : corpus_(std::move(corpus)),
          table_(std::move(table)),
          cfg_(std::move(cfg)),
          backend_(std::move(backend)),
          templates_(templates) {
        if (cfg_.hint_depth < 1 || cfg_.opponent_depth < 1) throw std::invalid_argument("search depths must be at least 1");
        if (cfg_.max_player_moves < 1) throw std::invalid_argument("move cap must be at least 1");
        if (cfg_.rga.k < 1) throw std::invalid_argument("RGA k must be at least 1");
    }

    [[nodiscard]] const std::vector<BoardTask>& corpus() const noexcept { return corpus_; }
    [[nodiscard]] const StudyConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const CalibrationTable& table() const noexcept { return table_; }

    [[nodiscard]] Session create_session(const std::string& id, const std::string& participant, Condition condition,
                                         int day) const {
        if (day < 1 || day > kStudyDays)
            throw StudyError(StudyError::Kind::BadRequest, "bad_day", "day must be 1, 2 or 3");
        const auto first = static_cast<std::size_t>((day - 1) * kGamesPerDay);
        if (corpus_.size() < first + kGamesPerDay)
            throw StudyError(StudyError::Kind::BadRequest, "corpus_exhausted",
                             "corpus has no boards for day " + std::to_string(day));
        Session s;
        s.id = id;
        s.participant = participant;
        s.condition = condition;
        s.day = day;
        for (int g = 0; g < kGamesPerDay; ++g) {
            const BoardTask& b = corpus_[first + static_cast<std::size_t>(g)];
            GameRecord r;
            r.board = b.ordinal;
            r.phase = phase_of_game(g);
            r.start_fen = b.fen;
            r.position = parse_fen(b.fen);
            s.games.push_back(std::move(r));
        }
        append(s, "session_created",
               {{"participant", participant}, {"condition", to_string(condition)}, {"day", day}, {"id", id}});
        start_game(s);
        return s;
    }

    /// Guidance for the player's current turn, per condition. Diagnostic games
    /// and the None condition get nothing.
    [[nodiscard]] Guidance guidance_for(const Session& s, int game) const {
        if (game < 0 || game >= static_cast<int>(s.games.size()))
            throw StudyError(StudyError::Kind::BadRequest, "bad_game", "no game " + std::to_string(game));
        const GameRecord& g = s.games[static_cast<std::size_t>(game)];
        Guidance out;
        if (s.condition == Condition::None || g.phase == Phase::Diagnostic || g.outcome != Outcome::Ongoing) return out;
        const Position& p = g.position;
        const ScoredMove best = ranking(p).back();
        out.highlight = best.move;
        out.highlight_san = to_san(p, best.move);
        if (s.condition == Condition::Hints) return out;

        const Variant v = s.condition == Condition::RGAPlus ? Variant::RGAPlus : Variant::RGA;
        out.rationale = explain_best_move(p, best.move, v, cfg_.rga, table_, cfg_.eval, templates_);
        return out;
    }

    /// Proposes (confirm = false) or commits (confirm = true) a player move.
    /// `turn`, when given, names the 1-based move being submitted; resubmitting
    /// an already committed turn returns its recorded outcome.
    TurnOutcome submit_move(Session& s, int game, const std::string& move_text, bool confirm = false,
                            std::optional<int> turn = std::nullopt) const {
        if (s.finished() && game == s.current_game)
            throw StudyError(StudyError::Kind::Conflict, "session_over", "all games are finished");
        if (game < 0 || game >= kGamesPerDay)
            throw StudyError(StudyError::Kind::BadRequest, "bad_game", "no game " + std::to_string(game));
        GameRecord& g = s.games[static_cast<std::size_t>(game)];
        if (turn && *turn >= 1 && *turn <= g.player_moves()) {
            const TurnOutcome& prior = g.turns[static_cast<std::size_t>(*turn - 1)];
            if (prior.move.uci() != move_text)
                throw StudyError(StudyError::Kind::Conflict, "turn_taken",
                                 "turn " + std::to_string(*turn) + " was already played as " + prior.move.uci());
            return prior;
        }
        if (s.finished()) throw StudyError(StudyError::Kind::Conflict, "session_over", "all games are finished");
        if (game != s.current_game)
            throw StudyError(StudyError::Kind::Conflict, "wrong_game",
                             "game " + std::to_string(game) + " is not the current game " + std::to_string(s.current_game));
        if (g.outcome != Outcome::Ongoing)
            throw StudyError(StudyError::Kind::Conflict, "game_over", "game " + std::to_string(game) + " is over");
        if (g.player_moves() >= cfg_.max_player_moves)
            throw StudyError(StudyError::Kind::Conflict, "move_cap", "move cap reached");
        if (turn && *turn != g.player_moves() + 1)
            throw StudyError(StudyError::Kind::Conflict, "turn_mismatch",
                             "expected turn " + std::to_string(g.player_moves() + 1));

        const Position& p = g.position;
        Move m;
        try {
            m = parse_uci_move(p, move_text);
        } catch (const ChessError& e) {
            throw StudyError(StudyError::Kind::BadRequest, "illegal_move", e.what());
        }

        TurnOutcome t;
        t.game = game;
        t.turn = g.player_moves() + 1;
        t.move = m;
        t.san = to_san(p, m);
        const auto ranked = ranking(p);
        t.percentile = percentile_rank(ranked, m);
        append(s, "move_proposed", {{"game", game}, {"turn", t.turn}, {"move", m.uci()}, {"confirm", confirm}});

        const bool cautions = g.phase == Phase::Instructional &&
                              (s.condition == Condition::RGA || s.condition == Condition::RGAPlus);
        if (cautions && !confirm && detect_non_optimal(ranked, m, cfg_.rga)) {
            CautionOptions opt;
            opt.use_domain = s.condition == Condition::RGAPlus;
            opt.eval = cfg_.eval;
            t.caution = generate_cautionary(p, m, cfg_.rga, table_, opt, templates_);
            t.fen = to_fen(p);
            s.pending = t;
            append(s, "caution_shown", {{"game", game}, {"turn", t.turn}, {"move", m.uci()}, {"percentile", t.percentile},
                                        {"lines", t.caution->lines}});
            return t;
        }

        // Commit.
        if (s.pending && s.pending->move == m) t.caution = s.pending->caution;
        s.pending.reset();
        t.committed = true;
        Position next = apply_move(p, m);
        append(s, "move_committed", {{"game", game}, {"turn", t.turn}, {"move", m.uci()}, {"san", t.san},
                                     {"percentile", t.percentile}, {"guided", !s.guidance.empty()}});
        Outcome outcome = terminal_outcome(next, true);
        if (outcome == Outcome::Ongoing && t.turn >= cfg_.max_player_moves) outcome = Outcome::MaxMoves;
        if (outcome == Outcome::Ongoing) {
            const Move reply = backend_.choose(next, cfg_.opponent_depth);
            t.reply = reply;
            t.reply_san = to_san(next, reply);
            next = apply_move(next, reply);
            append(s, "opponent_moved", {{"game", game}, {"turn", t.turn}, {"move", reply.uci()}, {"san", t.reply_san}});
            outcome = terminal_outcome(next, false);
        }
        t.outcome = outcome;
        t.fen = to_fen(next);
        g.position = next;
        g.outcome = outcome;
        g.turns.push_back(t);

        if (outcome != Outcome::Ongoing) {
            append(s, "game_ended", {{"game", game}, {"outcome", to_string(outcome)}, {"player_moves", g.player_moves()}});
            ++s.current_game;
            if (!s.finished()) start_game(s);
            else s.guidance = {};
        } else {
            show_guidance(s);
        }
        return t;
    }

    void record_questionnaire(Session& s, int likert) const {
        if (likert < 1 || likert > 5)
            throw StudyError(StudyError::Kind::BadRequest, "likert_range", "answer must be an integer from 1 to 5");
        if (!s.finished())
            throw StudyError(StudyError::Kind::Conflict, "session_incomplete", "questionnaire opens after all 9 games");
        if (s.questionnaire)
            throw StudyError(StudyError::Kind::Conflict, "duplicate_questionnaire", "questionnaire already answered");
        s.questionnaire = likert;
        append(s, "questionnaire", {{"likert", likert}});
    }

    /// Rebuilds a session by re-running the commands recorded in `log` and
    /// checks that the regenerated log matches it line for line.
    [[nodiscard]] Session replay(const std::vector<std::string>& log) const {
        if (log.empty()) throw std::invalid_argument("empty event log");
        std::optional<Session> s;
        for (const std::string& line : log) {
            const auto e = nlohmann::json::parse(line);
            const std::string type = e.at("type");
            if (type == "session_created") {
                auto c = condition_from_string(e.at("condition").get<std::string>());
                if (!c) throw std::runtime_error("replay: unknown condition");
                s = create_session(e.at("id"), e.at("participant"), *c, e.at("day"));
            } else if (type == "move_proposed") {
                if (!s) throw std::runtime_error("replay: log does not start with session_created");
                submit_move(*s, e.at("game"), e.at("move"), e.at("confirm"), e.at("turn").get<int>());
            } else if (type == "questionnaire") {
                if (!s) throw std::runtime_error("replay: log does not start with session_created");
                record_questionnaire(*s, e.at("likert"));
            }
        }
        if (!s || s->log != log) throw std::runtime_error("replay: regenerated log differs from the recorded one");
        return *s;
    }

    /// Rankings are memoized per position, so proposal and confirmation of
    /// the same move see the same list.
    [[nodiscard]] std::vector<ScoredMove> ranking(const Position& p) const {
        std::lock_guard lock(cache_mutex_);
        const std::string key = to_fen(p);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        auto r = backend_.rank(p, cfg_.hint_depth);
        cache_.emplace(key, r);
        return r;
    }

   private:
    static Outcome terminal_outcome(const Position& p, bool player_just_moved) {
        const GameStatus st = game_status(p);
        switch (st.kind) {
            case GameStatusKind::Checkmate: return player_just_moved ? Outcome::Win : Outcome::Loss;
            case GameStatusKind::Stalemate:
            case GameStatusKind::DrawInsufficientMaterial: return Outcome::Tie;
            case GameStatusKind::Ongoing: return Outcome::Ongoing;
        }
        return Outcome::Ongoing;
    }

    void start_game(Session& s) const {
        const GameRecord& g = s.games[static_cast<std::size_t>(s.current_game)];
        append(s, "game_started", {{"game", s.current_game}, {"board", g.board}, {"phase", to_string(g.phase)},
                                   {"fen", g.start_fen}});
        show_guidance(s);
    }

    void show_guidance(Session& s) const {
        s.guidance = guidance_for(s, s.current_game);
        if (s.guidance.empty()) return;
        const GameRecord& g = s.games[static_cast<std::size_t>(s.current_game)];
        nlohmann::json j = to_json(s.guidance);
        j["game"] = s.current_game;
        j["turn"] = g.player_moves() + 1;
        append(s, "guidance_shown", j);
    }

    static void append(Session& s, const std::string& type, nlohmann::json fields) {
        fields["seq"] = s.next_seq++;
        fields["type"] = type;
        fields["session"] = s.id;
        s.log.push_back(fields.dump());
    }

    std::vector<BoardTask> corpus_;
    CalibrationTable table_;
    StudyConfig cfg_;
    SearchBackend backend_;
    const TemplateRegistry& templates_;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::string, std::vector<ScoredMove>> cache_;
};

inline std::string log_text(const Session& s) {
    std::string out;
    for (const auto& l : s.log) out += l + "\n";
    return out;
}

inline double session_win_percentage(const Session& s, std::optional<Phase> only = std::nullopt) {
    OutcomeCounts c;
    for (const auto& g : s.games)
        if (g.outcome != Outcome::Ongoing && (!only || g.phase == *only)) c.add(g.outcome);
    return win_percentage(c);
}

// ---------------------------------------------------------------------------
// Scripted agents

enum class PolicyKind { RandomLegal, HintFollower, CautionAware };

struct Policy {
    PolicyKind kind = PolicyKind::RandomLegal;
    double follow = 1.0;  // hint-follower: probability of playing the engine's best move

    static Policy random_legal() { return {PolicyKind::RandomLegal, 0}; }
    static Policy hint_follower(double p) { return {PolicyKind::HintFollower, p}; }
    static Policy caution_aware() { return {PolicyKind::CautionAware, 0}; }
};

inline std::string to_string(const Policy& p) {
    switch (p.kind) {
        case PolicyKind::RandomLegal: return "random-legal";
        case PolicyKind::HintFollower: {
            std::ostringstream s;
            s << "hint-follower(" << p.follow << ")";
            return s.str();
        }
        case PolicyKind::CautionAware: return "caution-aware";
    }
    return "?";
}

inline std::optional<Policy> policy_from_string(const std::string& s) {
    if (s == "random-legal" || s == "random") return Policy::random_legal();
    if (s == "caution-aware") return Policy::caution_aware();
    if (s == "hint-follower") return Policy::hint_follower(1.0);
    const std::string prefix = "hint-follower(";
    if (s.rfind(prefix, 0) == 0 && s.back() == ')') {
        try {
            const double p = std::stod(s.substr(prefix.size(), s.size() - prefix.size() - 1));
            if (p >= 0 && p <= 1) return Policy::hint_follower(p);
        } catch (const std::exception&) {
        }
    }
    return std::nullopt;
}

struct DayMetrics {
    int day = 0;
    double win_percentage = 0;
    double diagnostic_win_percentage = 0;
    double mean_percentile = 0;
    OutcomeCounts outcomes;
    int moves = 0;
    int cautions = 0;
};

struct SimulationReport {
    std::string policy;
    Condition condition = Condition::None;
    std::uint64_t seed = 0;
    std::vector<DayMetrics> days;
    double win_percentage = 0;
    double mean_percentile = 0;
    std::vector<Session> sessions;
};

inline nlohmann::json to_json(const SimulationReport& r) {
    nlohmann::json days = nlohmann::json::array();
    for (const auto& d : r.days)
        days.push_back({{"day", d.day},
                        {"win_percentage", d.win_percentage},
                        {"diagnostic_win_percentage", d.diagnostic_win_percentage},
                        {"mean_percentile", d.mean_percentile},
                        {"wins", d.outcomes.wins},
                        {"ties", d.outcomes.ties},
                        {"losses", d.outcomes.losses},
                        {"maxmoves", d.outcomes.maxmoves},
                        {"moves", d.moves},
                        {"cautions", d.cautions}});
    return {{"policy", r.policy},        {"condition", to_string(r.condition)},     {"seed", r.seed}, {"days", days},
            {"win_percentage", r.win_percentage}, {"mean_percentile", r.mean_percentile}};
}

/// Plays every available study day (up to three) with a scripted policy.
/// The hint-follower consults the engine's best move in every game, guided
/// or not; the caution-aware agent plays randomly but switches to the best
/// move whenever a caution stops its proposal.
inline SimulationReport simulate_agent(const Policy& policy, Condition condition, const Study& study, std::uint64_t seed) {
    const int days = std::min<int>(kStudyDays, static_cast<int>(study.corpus().size()) / kGamesPerDay);
    if (days == 0) throw std::invalid_argument("simulation needs at least 9 boards");
    SimulationReport rep;
    rep.policy = to_string(policy);
    rep.condition = condition;
    rep.seed = seed;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    OutcomeCounts all;
    double pr_sum = 0;
    int pr_n = 0;

    for (int day = 1; day <= days; ++day) {
        Session s = study.create_session("sim-d" + std::to_string(day), "agent", condition, day);
        DayMetrics m;
        m.day = day;
        double day_pr = 0;
        while (!s.finished()) {
            const int game = s.current_game;
            const Position& p = s.games[static_cast<std::size_t>(game)].position;
            const auto moves = legal_moves(p);
            auto random_move = [&] { return moves[uniform_below(rng, moves.size())]; };
            Move choice;
            if (policy.kind == PolicyKind::HintFollower && unit(rng) < policy.follow)
                choice = study.ranking(p).back().move;
            else
                choice = random_move();

            TurnOutcome t = study.submit_move(s, game, choice.uci());
            if (!t.committed) {
                ++m.cautions;
                const Move retry = policy.kind == PolicyKind::CautionAware ? study.ranking(p).back().move : choice;
                t = study.submit_move(s, game, retry.uci(), true);
            }
            ++m.moves;
            day_pr += t.percentile;
        }
        OutcomeCounts diag;
        for (const auto& g : s.games) {
            m.outcomes.add(g.outcome);
            all.add(g.outcome);
            if (g.phase == Phase::Diagnostic) diag.add(g.outcome);
        }
        m.win_percentage = win_percentage(m.outcomes);
        m.diagnostic_win_percentage = win_percentage(diag);
        m.mean_percentile = day_pr / m.moves;
        pr_sum += day_pr;
        pr_n += m.moves;
        rep.days.push_back(m);
        rep.sessions.push_back(std::move(s));
    }
    rep.win_percentage = win_percentage(all);
    rep.mean_percentile = pr_sum / pr_n;
    return rep;
}

}  // namespace rgachess

#endif  // RGACHESS_STUDY_HPP
