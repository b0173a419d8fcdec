#ifndef RGACHESS_UCI_HPP
#define RGACHESS_UCI_HPP

// Bridge to an external UCI engine over stdio pipes (POSIX). Provides move
// ranking through MultiPV search and factor extraction from an engine's
// static-evaluation trace, mapped onto the factor registry by a per-version
// config file.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chess.hpp"
#include "evaluator.hpp"

namespace rgachess {

class UciError : public std::runtime_error {
   public:
    enum class Kind { Process, Timeout, Protocol, Capability, Busy, Parse };
    UciError(Kind kind, const std::string& message, std::vector<std::string> transcript = {})
        : std::runtime_error(message + excerpt(transcript)), kind_(kind), transcript_(std::move(transcript)) {}
    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::vector<std::string>& transcript() const noexcept { return transcript_; }

   private:
    static std::string excerpt(const std::vector<std::string>& t) {
        if (t.empty()) return "";
        std::string s = "\n--- transcript (last lines) ---";
        for (std::size_t i = t.size() > 12 ? t.size() - 12 : 0; i < t.size(); ++i) s += "\n" + t[i];
        return s;
    }
    Kind kind_;
    std::vector<std::string> transcript_;
};

struct EngineOptions {
    std::vector<std::string> args;
    std::chrono::milliseconds timeout{10000};
    std::vector<std::pair<std::string, std::string>> setoptions;
};

/// How one engine version's eval trace maps onto the factor registry.
struct TraceMapping {
    std::string engine;        // "id name" prefix this mapping applies to
    double scale = 100.0;      // trace units -> centipawns
    std::string phase = "eg";  // "mg" or "eg" column of the Total block
    bool fold_unmapped = false;  // unmapped terms go to Material instead of being dropped
    std::map<std::string, std::optional<UtilityFactor>> terms;  // nullopt = drop
};

inline TraceMapping trace_mapping_from_json(const nlohmann::json& j) {
    TraceMapping m;
    m.engine = j.at("engine").get<std::string>();
    m.scale = j.value("scale", 100.0);
    m.phase = j.value("phase", std::string("eg"));
    if (m.phase != "mg" && m.phase != "eg") throw std::invalid_argument("trace mapping phase must be 'mg' or 'eg'");
    m.fold_unmapped = j.value("unmapped", std::string("drop")) == "material";
    for (const auto& [term, target] : j.at("terms").items()) {
        if (target.is_null()) {
            m.terms[term] = std::nullopt;
            continue;
        }
        auto f = utility_factor_from_name(target.get<std::string>());
        if (!f) throw std::invalid_argument("trace mapping names unknown factor '" + target.get<std::string>() + "'");
        m.terms[term] = *f;
    }
    return m;
}

inline TraceMapping load_trace_mapping(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace mapping '" + path + "'");
    return trace_mapping_from_json(nlohmann::json::parse(in));
}

/// Finds the mapping in `dir` whose engine field prefixes `engine_name`.
inline std::optional<TraceMapping> find_trace_mapping(const std::string& dir, const std::string& engine_name) {
    std::error_code ec;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir, ec))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        TraceMapping m = load_trace_mapping(f.string());
        if (engine_name.rfind(m.engine, 0) == 0) return m;
    }
    return std::nullopt;
}

/// Parses a Stockfish-style "Term | White | Black | Total" table. Returns
/// white-relative centipawns per registry factor; missing factors stay 0.
inline FactorVector parse_eval_trace(const std::vector<std::string>& lines, const TraceMapping& m) {
    FactorVector fv;
    bool in_table = false, total = false;
    for (const std::string& raw : lines) {
        if (raw.find('|') == std::string::npos) {
            if (in_table && raw.find_first_not_of(" -+") != std::string::npos && raw.find("----") == std::string::npos)
                throw UciError(UciError::Kind::Parse, "eval trace: unexpected line '" + raw + "'");
            continue;
        }
        std::vector<std::string> cols;
        std::stringstream ss(raw);
        for (std::string c; std::getline(ss, c, '|');) cols.push_back(c);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
        };
        const std::string term = trim(cols[0]);
        if (term == "Term" || term.empty() || term.find("---") != std::string::npos) {
            in_table = true;
            continue;
        }
        if (cols.size() != 4) throw UciError(UciError::Kind::Parse, "eval trace: malformed row '" + raw + "'");
        std::istringstream vs(cols[3]);
        std::string mg, eg;
        if (!(vs >> mg >> eg)) throw UciError(UciError::Kind::Parse, "eval trace: malformed row '" + raw + "'");
        if (term == "Total") {
            total = true;
            break;
        }
        const std::string& cell = m.phase == "mg" ? mg : eg;
        double v = 0;
        try {
            std::size_t used = 0;
            v = std::stod(cell, &used);
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw UciError(UciError::Kind::Parse, "eval trace: bad number in row '" + raw + "'");
        }
        std::optional<UtilityFactor> target;
        if (auto it = m.terms.find(term); it != m.terms.end())
            target = it->second;
        else if (m.fold_unmapped)
            target = UtilityFactor::Material;
        if (target) fv[*target] += std::llround(v * m.scale);
    }
    if (!total) {
        const std::string last = lines.empty() ? std::string("<no output>") : lines.back();
        throw UciError(UciError::Kind::Parse, "eval trace: table ends without a Total row at '" + last + "'");
    }
    return fv;
}

/// One engine process. Requests are strictly serialized: a call made while
/// another is in flight fails with a Busy error instead of interleaving.
class Engine {
   public:
    static std::unique_ptr<Engine> connect(const std::string& path, const EngineOptions& opt = {}) {
        std::unique_ptr<Engine> e(new Engine(opt));
        e->spawn(path);
        e->handshake();
        return e;
    }

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    ~Engine() {
        if (pid_ > 0) {
            if (to_ >= 0) {
                const char quit[] = "quit\n";
                [[maybe_unused]] auto n = ::write(to_, quit, sizeof quit - 1);
            }
            close_fds();
            for (int i = 0; i < 50; ++i) {
                if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
                ::usleep(2000);
            }
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, nullptr, 0);
        }
    }

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] bool supports_multipv() const noexcept { return multipv_; }
    [[nodiscard]] const std::vector<std::string>& transcript() const noexcept { return transcript_; }

    /// Scores every legal move with one MultiPV search; same ordering
    /// contract as rank_moves. Scores are converted from the engine's
    /// side-to-move view to white-relative and back to the mover's view.
    std::vector<ScoredMove> rank_moves(const Position& p, int depth) {
        Request r(*this);
        if (!multipv_) throw UciError(UciError::Kind::Capability, "engine '" + name_ + "' has no MultiPV option");
        const auto legal = legal_moves(p);
        if (legal.empty()) throw EvaluationError("cannot rank moves of a terminal position: " + to_fen(p));
        send("setoption name MultiPV value " + std::to_string(legal.size()));
        sync();
        send("position fen " + to_fen(p));
        send("go depth " + std::to_string(depth));

        std::map<int, std::pair<std::string, int>> lines;  // multipv index -> (first pv move, mover score)
        for (;;) {
            const std::string l = read_line();
            std::istringstream in(l);
            std::string tok;
            in >> tok;
            if (tok == "bestmove") break;
            if (tok != "info") continue;
            int index = 1;
            std::optional<int> score;
            std::string first;
            while (in >> tok) {
                if (tok == "multipv") in >> index;
                else if (tok == "score") {
                    std::string kind;
                    int v = 0;
                    in >> kind >> v;
                    if (kind == "cp") score = v;
                    else if (kind == "mate") score = v > 0 ? kMateBase - (2 * v - 1) : -(kMateBase - 2 * -v);
                } else if (tok == "pv") {
                    in >> first;
                    break;
                }
            }
            if (score && !first.empty()) lines[index] = {first, *score};
        }

        std::vector<ScoredMove> out;
        for (const Move& m : legal) {
            const auto it = std::find_if(lines.begin(), lines.end(), [&](const auto& e) { return e.second.first == m.uci(); });
            if (it == lines.end())
                throw UciError(UciError::Kind::Protocol, "engine returned no line for legal move " + m.uci(), transcript_);
            const int white = p.side_to_move() == Color::White ? it->second.second : -it->second.second;
            const int mover = p.side_to_move() == Color::White ? white : -white;
            out.push_back({m, mover, mate_distance(mover), 0});
        }
        finalize_ranking(out);
        return out;
    }

    /// The engine's own choice at `depth` (single line).
    Move best_move(const Position& p, int depth) {
        Request r(*this);
        if (multipv_) send("setoption name MultiPV value 1");
        sync();
        send("position fen " + to_fen(p));
        send("go depth " + std::to_string(depth));
        for (;;) {
            std::istringstream in(read_line());
            std::string tok, mv;
            in >> tok;
            if (tok != "bestmove") continue;
            in >> mv;
            try {
                return parse_uci_move(p, mv);
            } catch (const ChessError&) {
                throw UciError(UciError::Kind::Protocol, "engine chose illegal move '" + mv + "'", transcript_);
            }
        }
    }

    /// Factor vector from the engine's "eval" trace.
    FactorVector factor_trace(const Position& p, const TraceMapping& m) {
        Request r(*this);
        if (name_.rfind(m.engine, 0) != 0)
            throw UciError(UciError::Kind::Capability,
                           "trace mapping is for '" + m.engine + "' but the engine is '" + name_ + "'");
        sync();
        send("position fen " + to_fen(p));
        send("eval");
        std::vector<std::string> table;
        for (;;) {
            std::string l;
            try {
                l = read_line();
            } catch (const UciError& e) {
                if (e.kind() != UciError::Kind::Timeout) throw;
                return parse_eval_trace(table, m);  // reports the truncation
            }
            if (l.rfind("Total evaluation", 0) == 0 || l.rfind("Final evaluation", 0) == 0) break;
            table.push_back(l);
        }
        try {
            return parse_eval_trace(table, m);
        } catch (const UciError& e) {
            throw UciError(UciError::Kind::Parse, e.what(), transcript_);
        }
    }

   private:
    explicit Engine(EngineOptions opt) : opt_(std::move(opt)) {}

    struct Request {
        explicit Request(Engine& e) : e_(e) {
            if (e_.busy_.exchange(true))
                throw UciError(UciError::Kind::Busy, "engine handle already has a request in flight");
        }
        ~Request() { e_.busy_ = false; }
        Engine& e_;
    };

    void spawn(const std::string& path) {
        int in_pipe[2], out_pipe[2];
        if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0)
            throw UciError(UciError::Kind::Process, std::string("pipe: ") + std::strerror(errno));
        pid_ = ::fork();
        if (pid_ < 0) throw UciError(UciError::Kind::Process, std::string("fork: ") + std::strerror(errno));
        if (pid_ == 0) {
            ::dup2(in_pipe[0], STDIN_FILENO);
            ::dup2(out_pipe[1], STDOUT_FILENO);
            ::close(in_pipe[0]);
            ::close(in_pipe[1]);
            ::close(out_pipe[0]);
            ::close(out_pipe[1]);
            std::vector<char*> argv;
            argv.push_back(const_cast<char*>(path.c_str()));
            for (const auto& a : opt_.args) argv.push_back(const_cast<char*>(a.c_str()));
            argv.push_back(nullptr);
            ::execv(path.c_str(), argv.data());
            ::_exit(127);
        }
        ::close(in_pipe[0]);
        ::close(out_pipe[1]);
        to_ = in_pipe[1];
        from_ = out_pipe[0];
        ::signal(SIGPIPE, SIG_IGN);
    }

    void handshake() {
        send("uci");
        for (;;) {
            const std::string l = read_line();
            std::istringstream in(l);
            std::string tok;
            in >> tok;
            if (tok == "uciok") break;
            if (tok == "id") {
                in >> tok;
                if (tok == "name") {
                    std::getline(in >> std::ws, name_);
                }
            } else if (tok == "option" && l.find("name MultiPV ") != std::string::npos) {
                multipv_ = true;
            }
            // Anything else is ignored, as UCI asks of GUIs.
        }
        for (const auto& [k, v] : opt_.setoptions) send("setoption name " + k + " value " + v);
        sync();
    }

    void sync() {
        send("isready");
        while (read_line() != "readyok") {
        }
    }

    void send(const std::string& line) {
        transcript_.push_back("> " + line);
        const std::string data = line + "\n";
        std::size_t off = 0;
        while (off < data.size()) {
            const auto n = ::write(to_, data.data() + off, data.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw UciError(UciError::Kind::Process, "engine pipe closed while sending '" + line + "'", transcript_);
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string read_line() {
        const auto deadline = std::chrono::steady_clock::now() + opt_.timeout;
        for (;;) {
            if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                transcript_.push_back("< " + line);
                return line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) throw UciError(UciError::Kind::Timeout, "engine did not answer in time", transcript_);
            pollfd pfd{from_, POLLIN, 0};
            const int r = ::poll(&pfd, 1, static_cast<int>(left.count()));
            if (r < 0 && errno == EINTR) continue;
            if (r == 0) continue;
            char buf[4096];
            const auto n = ::read(from_, buf, sizeof buf);
            if (n <= 0) throw UciError(UciError::Kind::Process, "engine closed its output", transcript_);
            buffer_.append(buf, static_cast<std::size_t>(n));
        }
    }

    void close_fds() {
        if (to_ >= 0) ::close(to_);
        if (from_ >= 0) ::close(from_);
        to_ = from_ = -1;
    }

    EngineOptions opt_;
    pid_t pid_ = -1;
    int to_ = -1;
    int from_ = -1;
    std::string buffer_;
    std::string name_;
    bool multipv_ = false;
    std::atomic<bool> busy_{false};
    std::vector<std::string> transcript_;
};

}  // namespace rgachess

#endif  // RGACHESS_UCI_HPP
