#ifndef RGACHESS_CHESS_HPP
#define RGACHESS_CHESS_HPP

// Rules-complete chess kernel: bitboard position, FEN, legal move generation,
// move application, game status, SAN and perft.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rgachess {

using Bitboard = std::uint64_t;

enum class Color : std::uint8_t { White = 0, Black = 1 };

constexpr Color operator~(Color c) noexcept {
    return c == Color::White ? Color::Black : Color::White;
}
constexpr int index(Color c) noexcept { return static_cast<int>(c); }

enum class PieceType : std::uint8_t { Pawn = 0, Knight, Bishop, Rook, Queen, King, None };

constexpr int index(PieceType t) noexcept { return static_cast<int>(t); }

struct Piece {
    Color color = Color::White;
    PieceType type = PieceType::None;

    [[nodiscard]] constexpr bool empty() const noexcept { return type == PieceType::None; }
    friend constexpr bool operator==(const Piece&, const Piece&) = default;
};

/// Square index 0..63, a1 = 0, h1 = 7, a8 = 56.
using Square = int;

constexpr int file_of(Square s) noexcept { return s & 7; }
constexpr int rank_of(Square s) noexcept { return s >> 3; }
constexpr Square make_square(int file, int rank) noexcept { return rank * 8 + file; }
constexpr Bitboard bit(Square s) noexcept { return Bitboard{1} << s; }

inline std::string square_name(Square s) {
    return {static_cast<char>('a' + file_of(s)), static_cast<char>('1' + rank_of(s))};
}

inline std::optional<Square> parse_square(std::string_view text) {
    if (text.size() != 2) return std::nullopt;
    if (text[0] < 'a' || text[0] > 'h' || text[1] < '1' || text[1] > '8') return std::nullopt;
    return make_square(text[0] - 'a', text[1] - '1');
}

inline char piece_char(Piece p) {
    constexpr std::string_view kLetters = "pnbrqk";
    if (p.empty()) return '.';
    char c = kLetters[index(p.type)];
    return p.color == Color::White ? static_cast<char>(c - 'a' + 'A') : c;
}

inline std::optional<Piece> piece_from_char(char c) {
    constexpr std::string_view kLetters = "pnbrqk";
    const bool white = c >= 'A' && c <= 'Z';
    const char lower = white ? static_cast<char>(c - 'A' + 'a') : c;
    auto pos = kLetters.find(lower);
    if (pos == std::string_view::npos) return std::nullopt;
    return Piece{white ? Color::White : Color::Black, static_cast<PieceType>(pos)};
}

inline std::string piece_name(PieceType t) {
    switch (t) {
        case PieceType::Pawn: return "pawn";
        case PieceType::Knight: return "knight";
        case PieceType::Bishop: return "bishop";
        case PieceType::Rook: return "rook";
        case PieceType::Queen: return "queen";
        case PieceType::King: return "king";
        default: return "none";
    }
}

// ---------------------------------------------------------------------------
// Errors

class ChessError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// FEN parse failure; `field()` names the offending FEN field.
class FenError : public ChessError {
   public:
    FenError(std::string field, const std::string& detail)
        : ChessError("FEN " + field + ": " + detail), field_(std::move(field)) {}
    [[nodiscard]] const std::string& field() const noexcept { return field_; }

   private:
    std::string field_;
};

class IllegalMoveError : public ChessError {
   public:
    IllegalMoveError(std::string move, const std::string& reason)
        : ChessError("illegal move " + move + ": " + reason), move_(std::move(move)) {}
    [[nodiscard]] const std::string& move() const noexcept { return move_; }

   private:
    std::string move_;
};

// ---------------------------------------------------------------------------
// Moves

enum class MoveKind : std::uint8_t { Normal, Capture, Castle, EnPassant, Promotion, PromotionCapture };

struct Move {
    Square from = 0;
    Square to = 0;
    PieceType promotion = PieceType::None;
    MoveKind kind = MoveKind::Normal;

    [[nodiscard]] constexpr bool is_capture() const noexcept {
        return kind == MoveKind::Capture || kind == MoveKind::EnPassant ||
               kind == MoveKind::PromotionCapture;
    }
    [[nodiscard]] constexpr bool is_promotion() const noexcept {
        return promotion != PieceType::None;
    }

    /// Long algebraic text, e.g. "e2e4" or "a7a8q".
    [[nodiscard]] std::string uci() const {
        std::string s = square_name(from) + square_name(to);
        if (is_promotion()) s += "pnbrqk"[index(promotion)];
        return s;
    }

    friend constexpr bool operator==(const Move& a, const Move& b) noexcept {
        return a.from == b.from && a.to == b.to && a.promotion == b.promotion;
    }
    friend constexpr bool operator<(const Move& a, const Move& b) noexcept {
        if (a.from != b.from) return a.from < b.from;
        if (a.to != b.to) return a.to < b.to;
        return index(a.promotion) < index(b.promotion);
    }
};

enum class Castling : std::uint8_t {
    WhiteKing = 1,
    WhiteQueen = 2,
    BlackKing = 4,
    BlackQueen = 8,
};

// ---------------------------------------------------------------------------
// Attack tables

namespace detail {

struct Tables {
    std::array<Bitboard, 64> knight{};
    std::array<Bitboard, 64> king{};
    std::array<std::array<Bitboard, 64>, 2> pawn{};
    // Rays in directions N, NE, E, SE, S, SW, W, NW.
    std::array<std::array<Bitboard, 64>, 8> ray{};

    Tables() {
        constexpr int kDirs[8][2] = {{0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}};
        constexpr int kKnight[8][2] = {{1, 2}, {2, 1}, {2, -1}, {1, -2}, {-1, -2}, {-2, -1}, {-2, 1}, {-1, 2}};
        for (Square s = 0; s < 64; ++s) {
            const int f = file_of(s), r = rank_of(s);
            auto on = [](int ff, int rr) { return ff >= 0 && ff < 8 && rr >= 0 && rr < 8; };
            for (auto [df, dr] : kKnight)
                if (on(f + df, r + dr)) knight[s] |= bit(make_square(f + df, r + dr));
            for (int d = 0; d < 8; ++d) {
                const int df = kDirs[d][0], dr = kDirs[d][1];
                if (on(f + df, r + dr)) king[s] |= bit(make_square(f + df, r + dr));
                for (int ff = f + df, rr = r + dr; on(ff, rr); ff += df, rr += dr)
                    ray[d][s] |= bit(make_square(ff, rr));
            }
            if (on(f - 1, r + 1)) pawn[0][s] |= bit(make_square(f - 1, r + 1));
            if (on(f + 1, r + 1)) pawn[0][s] |= bit(make_square(f + 1, r + 1));
            if (on(f - 1, r - 1)) pawn[1][s] |= bit(make_square(f - 1, r - 1));
            if (on(f + 1, r - 1)) pawn[1][s] |= bit(make_square(f + 1, r - 1));
        }
    }
};

inline const Tables& tables() {
    static const Tables t;
    return t;
}

// Directions 0..2 and 7 increase the square index (N, NE, E, NW).
inline Bitboard ray_attacks(int dir, Square s, Bitboard occ) {
    const Bitboard r = tables().ray[dir][s];
    const Bitboard blockers = r & occ;
    if (!blockers) return r;
    const bool positive = dir <= 2 || dir == 7;
    const Square b = positive ? std::countr_zero(blockers) : 63 - std::countl_zero(blockers);
    return r ^ tables().ray[dir][b];
}

}  // namespace detail

inline Bitboard knight_attacks(Square s) { return detail::tables().knight[s]; }
inline Bitboard king_attacks(Square s) { return detail::tables().king[s]; }
inline Bitboard pawn_attacks(Color c, Square s) { return detail::tables().pawn[index(c)][s]; }

inline Bitboard rook_attacks(Square s, Bitboard occ) {
    return detail::ray_attacks(0, s, occ) | detail::ray_attacks(2, s, occ) |
           detail::ray_attacks(4, s, occ) | detail::ray_attacks(6, s, occ);
}

inline Bitboard bishop_attacks(Square s, Bitboard occ) {
    return detail::ray_attacks(1, s, occ) | detail::ray_attacks(3, s, occ) |
           detail::ray_attacks(5, s, occ) | detail::ray_attacks(7, s, occ);
}

inline Bitboard queen_attacks(Square s, Bitboard occ) {
    return rook_attacks(s, occ) | bishop_attacks(s, occ);
}

template <typename F>
inline void for_each_square(Bitboard b, F&& f) {
    while (b) {
        f(static_cast<Square>(std::countr_zero(b)));
        b &= b - 1;
    }
}

inline constexpr std::string_view kStartFen = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1";

// ---------------------------------------------------------------------------
// Position

/// Immutable-by-convention chess state. All mutating helpers are private;
/// public operations return new values.
class Position {
   public:
    Position() { board_.fill(Piece{}); }

    [[nodiscard]] Piece at(Square s) const noexcept { return board_[s]; }
    [[nodiscard]] Color side_to_move() const noexcept { return side_; }
    [[nodiscard]] std::uint8_t castling() const noexcept { return castling_; }
    [[nodiscard]] bool can_castle(Castling c) const noexcept {
        return castling_ & static_cast<std::uint8_t>(c);
    }
    [[nodiscard]] std::optional<Square> en_passant() const noexcept {
        if (ep_ < 0) return std::nullopt;
        return ep_;
    }
    [[nodiscard]] int halfmove_clock() const noexcept { return halfmove_; }
    [[nodiscard]] int fullmove_number() const noexcept { return fullmove_; }

    [[nodiscard]] Bitboard pieces(Color c) const noexcept { return by_color_[index(c)]; }
    [[nodiscard]] Bitboard pieces(PieceType t) const noexcept { return by_type_[index(t)]; }
    [[nodiscard]] Bitboard pieces(Color c, PieceType t) const noexcept {
        return by_color_[index(c)] & by_type_[index(t)];
    }
    [[nodiscard]] Bitboard occupied() const noexcept { return by_color_[0] | by_color_[1]; }
    [[nodiscard]] int piece_count() const noexcept { return std::popcount(occupied()); }

    [[nodiscard]] Square king_square(Color c) const noexcept {
        return std::countr_zero(pieces(c, PieceType::King));
    }

    /// Squares attacked by `by` (pieces of that color), given current occupancy.
    [[nodiscard]] Bitboard attackers_to(Square s, Color by, Bitboard occ) const noexcept {
        const Bitboard them = pieces(by);
        return (pawn_attacks(~by, s) & them & pieces(PieceType::Pawn)) |
               (knight_attacks(s) & them & pieces(PieceType::Knight)) |
               (king_attacks(s) & them & pieces(PieceType::King)) |
               (bishop_attacks(s, occ) & them & (pieces(PieceType::Bishop) | pieces(PieceType::Queen))) |
               (rook_attacks(s, occ) & them & (pieces(PieceType::Rook) | pieces(PieceType::Queen)));
    }
    [[nodiscard]] bool is_attacked(Square s, Color by) const noexcept {
        return attackers_to(s, by, occupied()) != 0;
    }

    /// Union of all squares attacked by color `c`.
    [[nodiscard]] Bitboard attack_map(Color c) const noexcept {
        const Bitboard occ = occupied();
        Bitboard a = 0;
        for_each_square(pieces(c), [&](Square s) { a |= attacks_from(s, occ); });
        return a;
    }

    /// Attack set of the piece on `s` (empty if none).
    [[nodiscard]] Bitboard attacks_from(Square s, Bitboard occ) const noexcept {
        const Piece p = board_[s];
        switch (p.type) {
            case PieceType::Pawn: return pawn_attacks(p.color, s);
            case PieceType::Knight: return knight_attacks(s);
            case PieceType::Bishop: return bishop_attacks(s, occ);
            case PieceType::Rook: return rook_attacks(s, occ);
            case PieceType::Queen: return queen_attacks(s, occ);
            case PieceType::King: return king_attacks(s);
            default: return 0;
        }
    }

    [[nodiscard]] bool in_check() const noexcept { return in_check(side_); }
    [[nodiscard]] bool in_check(Color c) const noexcept {
        return is_attacked(king_square(c), ~c);
    }

    [[nodiscard]] std::uint64_t hash() const noexcept;

    friend bool operator==(const Position& a, const Position& b) noexcept {
        return a.board_ == b.board_ && a.side_ == b.side_ && a.castling_ == b.castling_ &&
               a.ep_ == b.ep_ && a.halfmove_ == b.halfmove_ && a.fullmove_ == b.fullmove_;
    }

   private:
    friend Position parse_fen(std::string_view text);
    friend Position apply_move_unchecked(const Position& p, const Move& m);
    friend Position mirror(const Position& p);
    friend class PositionBuilder;

    void put(Square s, Piece p) noexcept {
        board_[s] = p;
        by_color_[index(p.color)] |= bit(s);
        by_type_[index(p.type)] |= bit(s);
    }
    void remove(Square s) noexcept {
        const Piece p = board_[s];
        if (p.empty()) return;
        by_color_[index(p.color)] &= ~bit(s);
        by_type_[index(p.type)] &= ~bit(s);
        board_[s] = Piece{};
    }

    std::array<Piece, 64> board_{};
    std::array<Bitboard, 2> by_color_{};
    std::array<Bitboard, 6> by_type_{};
    Color side_ = Color::White;
    std::uint8_t castling_ = 0;
    std::int8_t ep_ = -1;
    int halfmove_ = 0;
    int fullmove_ = 1;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct Zobrist {
    std::array<std::array<std::uint64_t, 64>, 12> piece{};
    std::array<std::uint64_t, 16> castling{};
    std::array<std::uint64_t, 8> ep_file{};
    std::uint64_t black = 0;

    Zobrist() {
        std::uint64_t s = 0x5EEDC0FFEEULL;
        for (auto& row : piece)
            for (auto& k : row) k = splitmix64(s);
        for (auto& k : castling) k = splitmix64(s);
        for (auto& k : ep_file) k = splitmix64(s);
        black = splitmix64(s);
    }
};

inline const Zobrist& zobrist() {
    static const Zobrist z;
    return z;
}

}  // namespace detail

inline std::uint64_t Position::hash() const noexcept {
    const auto& z = detail::zobrist();
    std::uint64_t h = 0;
    for_each_square(occupied(), [&](Square s) {
        const Piece p = board_[s];
        h ^= z.piece[index(p.color) * 6 + index(p.type)][s];
    });
    h ^= z.castling[castling_];
    if (ep_ >= 0) h ^= z.ep_file[file_of(ep_)];
    if (side_ == Color::Black) h ^= z.black;
    return h;
}

/// Assembles positions square by square; `build()` validates like parse_fen.
class PositionBuilder {
   public:
    PositionBuilder& put(Square s, Piece p) {
        pos_.remove(s);
        pos_.put(s, p);
        return *this;
    }
    PositionBuilder& side(Color c) {
        pos_.side_ = c;
        return *this;
    }
    PositionBuilder& castling(std::uint8_t rights) {
        pos_.castling_ = rights;
        return *this;
    }
    PositionBuilder& en_passant(std::optional<Square> s) {
        pos_.ep_ = s ? static_cast<std::int8_t>(*s) : std::int8_t{-1};
        return *this;
    }
    PositionBuilder& clocks(int halfmove, int fullmove) {
        pos_.halfmove_ = halfmove;
        pos_.fullmove_ = fullmove;
        return *this;
    }
    /// Returns the position if it satisfies every invariant, otherwise nullopt.
    [[nodiscard]] std::optional<Position> try_build() const;
    /// Throws FenError naming the violated invariant.
    [[nodiscard]] Position build() const;

   private:
    Position pos_;
};

std::string to_fen(const Position& p);

namespace detail {

/// Throws FenError on the first violated structural invariant.
inline void validate(const Position& p) {
    for (Color c : {Color::White, Color::Black}) {
        const int kings = std::popcount(p.pieces(c, PieceType::King));
        if (kings != 1)
            throw FenError("piece placement", std::string("expected exactly one ") +
                                                  (c == Color::White ? "white" : "black") + " king, found " +
                                                  std::to_string(kings));
    }
    constexpr Bitboard kBackRanks = 0xFF000000000000FFULL;
    if (p.pieces(PieceType::Pawn) & kBackRanks)
        throw FenError("piece placement", "pawn on first or last rank");
    if (king_attacks(p.king_square(Color::White)) & p.pieces(Color::Black, PieceType::King))
        throw FenError("piece placement", "kings on adjacent squares");
    if (p.in_check(~p.side_to_move()))
        throw FenError("side to move", "side not to move is in check");

    const auto need = [&](Castling right, Square king, Square rook, Color c) {
        if (!p.can_castle(right)) return;
        if (p.at(king) != Piece{c, PieceType::King} || p.at(rook) != Piece{c, PieceType::Rook})
            throw FenError("castling", "castling right without king and rook on home squares");
    };
    need(Castling::WhiteKing, 4, 7, Color::White);
    need(Castling::WhiteQueen, 4, 0, Color::White);
    need(Castling::BlackKing, 60, 63, Color::Black);
    need(Castling::BlackQueen, 60, 56, Color::Black);

    if (auto ep = p.en_passant()) {
        const Color mover = ~p.side_to_move();  // side that made the double push
        const int expected_rank = mover == Color::White ? 2 : 5;
        if (rank_of(*ep) != expected_rank)
            throw FenError("en passant", "square " + square_name(*ep) + " not on the push rank for the side to move");
        const int dir = mover == Color::White ? 8 : -8;
        const Square pawn_sq = *ep + dir;
        const Square origin = *ep - dir;
        if (p.at(pawn_sq) != Piece{mover, PieceType::Pawn} || !p.at(*ep).empty() || !p.at(origin).empty())
            throw FenError("en passant", "square " + square_name(*ep) + " does not follow a double pawn push");
    }
    if (p.halfmove_clock() < 0) throw FenError("halfmove clock", "negative");
    if (p.fullmove_number() < 1) throw FenError("fullmove number", "must be at least 1");
}

}  // namespace detail

inline std::optional<Position> PositionBuilder::try_build() const {
    try {
        detail::validate(pos_);
    } catch (const FenError&) {
        return std::nullopt;
    }
    return pos_;
}

inline Position PositionBuilder::build() const {
    detail::validate(pos_);
    return pos_;
}

// ---------------------------------------------------------------------------
// FEN

inline Position parse_fen(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::vector<std::string> fields;
    for (std::string f; in >> f;) fields.push_back(f);
    if (fields.size() != 6)
        throw FenError("field count", "expected 6 fields, found " + std::to_string(fields.size()));

    Position p;
    int rank = 7, file = 0;
    for (char c : fields[0]) {
        if (c == '/') {
            if (file != 8) throw FenError("rank width", "rank " + std::to_string(rank + 1) + " has " +
                                                            std::to_string(file) + " files");
            if (--rank < 0) throw FenError("piece placement", "too many ranks");
            file = 0;
        } else if (c >= '1' && c <= '8') {
            file += c - '0';
            if (file > 8) throw FenError("rank width", "rank " + std::to_string(rank + 1) + " exceeds 8 files");
        } else if (auto piece = piece_from_char(c)) {
            if (file >= 8) throw FenError("rank width", "rank " + std::to_string(rank + 1) + " exceeds 8 files");
            p.put(make_square(file++, rank), *piece);
        } else {
            throw FenError("piece placement", std::string("unexpected character '") + c + "'");
        }
    }
    if (file != 8) throw FenError("rank width", "rank " + std::to_string(rank + 1) + " has " + std::to_string(file) + " files");
    if (rank != 0) throw FenError("piece placement", "expected 8 ranks");

    if (fields[1] == "w")
        p.side_ = Color::White;
    else if (fields[1] == "b")
        p.side_ = Color::Black;
    else
        throw FenError("side to move", "expected 'w' or 'b'");

    if (fields[2] != "-") {
        for (char c : fields[2]) {
            std::uint8_t flag = 0;
            switch (c) {
                case 'K': flag = static_cast<std::uint8_t>(Castling::WhiteKing); break;
                case 'Q': flag = static_cast<std::uint8_t>(Castling::WhiteQueen); break;
                case 'k': flag = static_cast<std::uint8_t>(Castling::BlackKing); break;
                case 'q': flag = static_cast<std::uint8_t>(Castling::BlackQueen); break;
                default: throw FenError("castling", std::string("unexpected character '") + c + "'");
            }
            if (p.castling_ & flag) throw FenError("castling", "duplicate flag");
            p.castling_ |= flag;
        }
    }

    if (fields[3] != "-") {
        auto sq = parse_square(fields[3]);
        if (!sq) throw FenError("en passant", "bad square '" + fields[3] + "'");
        p.ep_ = static_cast<std::int8_t>(*sq);
    }

    auto parse_int = [](const std::string& s, const char* field) {
        if (s.empty() || s.size() > 6 || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
            throw FenError(field, "expected a non-negative integer, found '" + s + "'");
        return std::stoi(s);
    };
    p.halfmove_ = parse_int(fields[4], "halfmove clock");
    p.fullmove_ = parse_int(fields[5], "fullmove number");

    detail::validate(p);
    return p;
}

inline std::string to_fen(const Position& p) {
    std::string out;
    for (int rank = 7; rank >= 0; --rank) {
        int empty = 0;
        for (int file = 0; file < 8; ++file) {
            const Piece pc = p.at(make_square(file, rank));
            if (pc.empty()) {
                ++empty;
                continue;
            }
            if (empty) out += static_cast<char>('0' + empty);
            empty = 0;
            out += piece_char(pc);
        }
        if (empty) out += static_cast<char>('0' + empty);
        if (rank) out += '/';
    }
    out += p.side_to_move() == Color::White ? " w " : " b ";
    std::string castle;
    if (p.can_castle(Castling::WhiteKing)) castle += 'K';
    if (p.can_castle(Castling::WhiteQueen)) castle += 'Q';
    if (p.can_castle(Castling::BlackKing)) castle += 'k';
    if (p.can_castle(Castling::BlackQueen)) castle += 'q';
    out += castle.empty() ? "-" : castle;
    out += ' ';
    out += p.en_passant() ? square_name(*p.en_passant()) : "-";
    out += ' ' + std::to_string(p.halfmove_clock()) + ' ' + std::to_string(p.fullmove_number());
    return out;
}

/// Collapses whitespace runs so FEN text can be compared after round trip.
inline std::string normalize_fen(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string out;
    for (std::string f; in >> f;) {
        if (!out.empty()) out += ' ';
        out += f;
    }
    return out;
}

inline Position start_position() { return parse_fen(kStartFen); }

// ---------------------------------------------------------------------------
// Move generation

namespace detail {

inline void add_pawn_moves(std::vector<Move>& out, Square from, Square to, bool capture) {
    if (rank_of(to) == 0 || rank_of(to) == 7) {
        for (PieceType t : {PieceType::Knight, PieceType::Bishop, PieceType::Rook, PieceType::Queen})
            out.push_back({from, to, t, capture ? MoveKind::PromotionCapture : MoveKind::Promotion});
    } else {
        out.push_back({from, to, PieceType::None, capture ? MoveKind::Capture : MoveKind::Normal});
    }
}

/// Pseudo-legal moves for `us`; castling and en passant only when `us` is to move.
inline void pseudo_legal(const Position& p, Color us, std::vector<Move>& out, bool specials) {
    const Bitboard own = p.pieces(us), enemy = p.pieces(~us), occ = p.occupied();
    const int push = us == Color::White ? 8 : -8;
    const int start_rank = us == Color::White ? 1 : 6;

    for_each_square(p.pieces(us, PieceType::Pawn), [&](Square s) {
        const Square one = s + push;
        if (!(occ & bit(one))) {
            add_pawn_moves(out, s, one, false);
            const Square two = one + push;
            if (rank_of(s) == start_rank && !(occ & bit(two))) out.push_back({s, two, PieceType::None, MoveKind::Normal});
        }
        for_each_square(pawn_attacks(us, s) & enemy, [&](Square t) { add_pawn_moves(out, s, t, true); });
        if (specials && p.en_passant() && (pawn_attacks(us, s) & bit(*p.en_passant())))
            out.push_back({s, *p.en_passant(), PieceType::None, MoveKind::EnPassant});
    });

    for (PieceType t : {PieceType::Knight, PieceType::Bishop, PieceType::Rook, PieceType::Queen, PieceType::King}) {
        for_each_square(p.pieces(us, t), [&](Square s) {
            for_each_square(p.attacks_from(s, occ) & ~own, [&](Square to) {
                out.push_back({s, to, PieceType::None, (enemy & bit(to)) ? MoveKind::Capture : MoveKind::Normal});
            });
        });
    }

    if (!specials || p.in_check(us)) return;
    const Color them = ~us;
    const auto try_castle = [&](Castling right, Square king, Square to, Bitboard between, Square pass) {
        if (!p.can_castle(right) || (occ & between)) return;
        if (p.is_attacked(pass, them) || p.is_attacked(to, them)) return;
        out.push_back({king, to, PieceType::None, MoveKind::Castle});
    };
    if (us == Color::White) {
        try_castle(Castling::WhiteKing, 4, 6, bit(5) | bit(6), 5);
        try_castle(Castling::WhiteQueen, 4, 2, bit(1) | bit(2) | bit(3), 3);
    } else {
        try_castle(Castling::BlackKing, 60, 62, bit(61) | bit(62), 61);
        try_castle(Castling::BlackQueen, 60, 58, bit(57) | bit(58) | bit(59), 59);
    }
}

}  // namespace detail

/// Applies a move known to be pseudo-legal for the side to move. No checking.
inline Position apply_move_unchecked(const Position& p, const Move& m) {
    Position n = p;
    const Color us = p.side_;
    const Piece mover = p.board_[m.from];
    const bool capture = !p.board_[m.to].empty() || m.kind == MoveKind::EnPassant;

    if (m.kind == MoveKind::EnPassant) n.remove(m.to + (us == Color::White ? -8 : 8));
    n.remove(m.to);
    n.remove(m.from);
    n.put(m.to, m.is_promotion() ? Piece{us, m.promotion} : mover);

    if (m.kind == MoveKind::Castle) {
        const Square rook_from = m.to > m.from ? m.from + 3 : m.from - 4;
        const Square rook_to = m.to > m.from ? m.from + 1 : m.from - 1;
        n.remove(rook_from);
        n.put(rook_to, Piece{us, PieceType::Rook});
    }

    // Rights vanish when the king or a rook leaves, or a rook is captured at home.
    const auto clear_for = [&](Square s) {
        switch (s) {
            case 4: n.castling_ &= ~(1 | 2); break;
            case 7: n.castling_ &= ~1; break;
            case 0: n.castling_ &= ~2; break;
            case 60: n.castling_ &= ~(4 | 8); break;
            case 63: n.castling_ &= ~4; break;
            case 56: n.castling_ &= ~8; break;
            default: break;
        }
    };
    clear_for(m.from);
    clear_for(m.to);

    n.ep_ = -1;
    if (mover.type == PieceType::Pawn && std::abs(m.to - m.from) == 16)
        n.ep_ = static_cast<std::int8_t>((m.from + m.to) / 2);

    n.halfmove_ = (mover.type == PieceType::Pawn || capture) ? 0 : p.halfmove_ + 1;
    if (us == Color::Black) ++n.fullmove_;
    n.side_ = ~us;
    return n;
}

/// Strictly legal moves, sorted by (origin, destination, promotion piece).
inline std::vector<Move> legal_moves(const Position& p) {
    std::vector<Move> pseudo;
    pseudo.reserve(64);
    detail::pseudo_legal(p, p.side_to_move(), pseudo, true);
    std::vector<Move> out;
    out.reserve(pseudo.size());
    const Color us = p.side_to_move();
    for (const Move& m : pseudo)
        if (!apply_move_unchecked(p, m).in_check(us)) out.push_back(m);
    std::sort(out.begin(), out.end());
    return out;
}

inline bool has_legal_move(const Position& p) {
    std::vector<Move> pseudo;
    detail::pseudo_legal(p, p.side_to_move(), pseudo, true);
    const Color us = p.side_to_move();
    return std::any_of(pseudo.begin(), pseudo.end(),
                       [&](const Move& m) { return !apply_move_unchecked(p, m).in_check(us); });
}

/// Number of pseudo-legal piece moves for `c`, ignoring whose turn it is.
/// Castling and en passant are excluded so the count is color-symmetric.
inline int pseudo_legal_count(const Position& p, Color c) {
    std::vector<Move> moves;
    moves.reserve(64);
    detail::pseudo_legal(p, c, moves, false);
    return static_cast<int>(moves.size());
}

/// Looks up the legal move matching `m`'s squares and promotion piece.
inline std::optional<Move> find_legal(const Position& p, const Move& m) {
    for (const Move& lm : legal_moves(p))
        if (lm == m) return lm;
    return std::nullopt;
}

inline Position apply_move(const Position& p, const Move& m) {
    auto legal = find_legal(p, m);
    if (!legal) {
        const Piece pc = p.at(m.from);
        std::string reason;
        if (pc.empty())
            reason = "no piece on " + square_name(m.from);
        else if (pc.color != p.side_to_move())
            reason = "piece on " + square_name(m.from) + " belongs to the side not on move";
        else
            reason = "not a legal move in this position";
        throw IllegalMoveError(m.uci(), reason);
    }
    return apply_move_unchecked(p, *legal);
}

/// Parses long algebraic notation ("e2e4", "e7e8q") against the legal moves of `p`.
inline Move parse_uci_move(const Position& p, std::string_view text) {
    if (text.size() != 4 && text.size() != 5) throw IllegalMoveError(std::string(text), "malformed move text");
    auto from = parse_square(text.substr(0, 2));
    auto to = parse_square(text.substr(2, 2));
    if (!from || !to) throw IllegalMoveError(std::string(text), "malformed move text");
    Move m{*from, *to, PieceType::None, MoveKind::Normal};
    if (text.size() == 5) {
        auto pc = piece_from_char(text[4]);
        if (!pc || pc->type == PieceType::Pawn || pc->type == PieceType::King)
            throw IllegalMoveError(std::string(text), "bad promotion piece");
        m.promotion = pc->type;
    }
    auto legal = find_legal(p, m);
    if (!legal) throw IllegalMoveError(std::string(text), "not a legal move in this position");
    return *legal;
}

// ---------------------------------------------------------------------------
// Status

enum class GameStatusKind { Ongoing, Checkmate, Stalemate, DrawInsufficientMaterial };

struct GameStatus {
    GameStatusKind kind = GameStatusKind::Ongoing;
    std::optional<Color> winner;

    [[nodiscard]] bool terminal() const noexcept { return kind != GameStatusKind::Ongoing; }
    friend bool operator==(const GameStatus&, const GameStatus&) = default;
};

inline std::string to_string(GameStatusKind k) {
    switch (k) {
        case GameStatusKind::Ongoing: return "ongoing";
        case GameStatusKind::Checkmate: return "checkmate";
        case GameStatusKind::Stalemate: return "stalemate";
        case GameStatusKind::DrawInsufficientMaterial: return "draw-insufficient-material";
    }
    return "?";
}

/// K v K, K+minor v K, and K+B v K+B with same-colored bishops.
inline bool insufficient_material(const Position& p) {
    if (p.pieces(PieceType::Pawn) | p.pieces(PieceType::Rook) | p.pieces(PieceType::Queen)) return false;
    const Bitboard minors = p.pieces(PieceType::Knight) | p.pieces(PieceType::Bishop);
    const int n = std::popcount(minors);
    if (n <= 1) return true;
    if (n == 2 && !p.pieces(PieceType::Knight) && std::popcount(p.pieces(Color::White, PieceType::Bishop)) == 1) {
        constexpr Bitboard kDark = 0xAA55AA55AA55AA55ULL;
        const Bitboard b = p.pieces(PieceType::Bishop);
        return std::popcount(b & kDark) != 1;
    }
    return false;
}

inline GameStatus game_status(const Position& p) {
    if (!has_legal_move(p)) {
        if (p.in_check()) return {GameStatusKind::Checkmate, ~p.side_to_move()};
        return {GameStatusKind::Stalemate, std::nullopt};
    }
    if (insufficient_material(p)) return {GameStatusKind::DrawInsufficientMaterial, std::nullopt};
    return {};
}

// ---------------------------------------------------------------------------
// SAN

inline std::string to_san(const Position& p, const Move& move) {
    auto legal = find_legal(p, move);
    if (!legal) throw IllegalMoveError(move.uci(), "not a legal move in this position");
    const Move m = *legal;
    const Piece pc = p.at(m.from);
    std::string san;

    if (m.kind == MoveKind::Castle) {
        san = m.to > m.from ? "O-O" : "O-O-O";
    } else if (pc.type == PieceType::Pawn) {
        if (m.is_capture()) {
            san += static_cast<char>('a' + file_of(m.from));
            san += 'x';
        }
        san += square_name(m.to);
        if (m.is_promotion()) {
            san += '=';
            san += "PNBRQK"[index(m.promotion)];
        }
    } else {
        san += "PNBRQK"[index(pc.type)];
        bool ambiguous = false, same_file = false, same_rank = false;
        for (const Move& o : legal_moves(p)) {
            if (o.to != m.to || o.from == m.from || p.at(o.from).type != pc.type) continue;
            ambiguous = true;
            same_file |= file_of(o.from) == file_of(m.from);
            same_rank |= rank_of(o.from) == rank_of(m.from);
        }
        if (ambiguous) {
            if (!same_file)
                san += static_cast<char>('a' + file_of(m.from));
            else if (!same_rank)
                san += static_cast<char>('1' + rank_of(m.from));
            else
                san += square_name(m.from);
        }
        if (m.is_capture()) san += 'x';
        san += square_name(m.to);
    }

    const Position next = apply_move_unchecked(p, m);
    if (next.in_check()) san += has_legal_move(next) ? '+' : '#';
    return san;
}

/// Resolves SAN text (annotation glyphs and check marks ignored) to a legal move.
inline Move parse_san(const Position& p, std::string_view text) {
    auto strip = [](std::string_view s) {
        std::string out;
        for (char c : s)
            if (c != '+' && c != '#' && c != '!' && c != '?') out += c;
        if (out == "0-0") out = "O-O";
        if (out == "0-0-0") out = "O-O-O";
        return out;
    };
    const std::string want = strip(text);
    for (const Move& m : legal_moves(p))
        if (strip(to_san(p, m)) == want) return m;
    throw IllegalMoveError(std::string(text), "no legal move matches this SAN");
}

// ---------------------------------------------------------------------------
// Perft and mirroring

inline std::uint64_t perft(const Position& p, int depth) {
    if (depth == 0) return 1;
    const auto moves = legal_moves(p);
    if (depth == 1) return moves.size();
    std::uint64_t n = 0;
    for (const Move& m : moves) n += perft(apply_move_unchecked(p, m), depth - 1);
    return n;
}

/// Color-flipped position: ranks reversed, colors swapped, side to move swapped.
inline Position mirror(const Position& p) {
    Position n;
    for (Square s = 0; s < 64; ++s) {
        const Piece pc = p.board_[s];
        if (!pc.empty()) n.put(s ^ 56, Piece{~pc.color, pc.type});
    }
    n.side_ = ~p.side_;
    const std::uint8_t c = p.castling_;
    n.castling_ = static_cast<std::uint8_t>(((c & 3) << 2) | ((c >> 2) & 3));
    n.ep_ = p.ep_ < 0 ? std::int8_t{-1} : static_cast<std::int8_t>(p.ep_ ^ 56);
    n.halfmove_ = p.halfmove_;
    n.fullmove_ = p.fullmove_;
    return n;
}

inline Move mirror(const Move& m) { return {m.from ^ 56, m.to ^ 56, m.promotion, m.kind}; }

}  // namespace rgachess

#endif  // RGACHESS_CHESS_HPP
