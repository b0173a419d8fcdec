#ifndef RGACHESS_SERVICE_HPP
#define RGACHESS_SERVICE_HPP

// HTTP/JSON front end for study sessions. See docs/api.md for the schema.

#include <httplib.h>

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "study.hpp"
#include "version.hpp"

namespace rgachess {

/// Client-visible snapshot of a session. Every field is derived from the
/// session, which is itself a function of its event log.
inline nlohmann::json session_state(const Session& s) {
    using nlohmann::json;
    json j;
    j["id"] = s.id;
    j["participant"] = s.participant;
    j["condition"] = to_string(s.condition);
    j["day"] = s.day;
    j["games_total"] = kGamesPerDay;
    j["finished"] = s.finished();
    j["questionnaire"] = s.questionnaire ? json(*s.questionnaire) : json(nullptr);
    json outcomes = json::array();
    int completed = 0;
    for (const auto& g : s.games) {
        outcomes.push_back(to_string(g.outcome));
        if (g.outcome != Outcome::Ongoing) ++completed;
    }
    j["games_completed"] = completed;
    j["outcomes"] = outcomes;
    j["events"] = s.log.size();

    if (s.finished()) {
        j["game"] = nullptr;
        j["phase"] = nullptr;
        j["fen"] = nullptr;
        j["turn"] = nullptr;
        j["legal_moves"] = json::array();
    } else {
        const GameRecord& g = s.games[static_cast<std::size_t>(s.current_game)];
        j["game"] = s.current_game;
        j["phase"] = to_string(g.phase);
        j["fen"] = to_fen(g.position);
        j["turn"] = g.player_moves() + 1;
        json moves = json::array();
        for (const Move& m : legal_moves(g.position)) moves.push_back(m.uci());
        j["legal_moves"] = moves;
    }
    j["guidance"] = to_json(s.guidance);
    j["caution"] = s.pending ? to_json(*s.pending->caution) : json(nullptr);
    j["pending_move"] = s.pending ? json(s.pending->move.uci()) : json(nullptr);
    return j;
}

class StudyService {
   public:
    explicit StudyService(const Study& study) : study_(study) {}

    StudyService(const StudyService&) = delete;
    StudyService& operator=(const StudyService&) = delete;

    void attach(httplib::Server& srv) {
        srv.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            std::shared_lock lock(map_mutex_);
            reply(res, 200,
                  {{"status", "ok"},
                   {"version", kVersion},
                   {"template_version", TemplateRegistry::builtin().version()},
                   {"sessions", sessions_.size()},
                   {"boards", study_.corpus().size()}});
        });
        srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { return create(req); });
        });
        srv.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                auto e = find(req.matches[1]);
                std::lock_guard lock(e->mutex);
                return std::make_pair(200, session_state(e->session));
            });
        });
        srv.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                auto e = find(req.matches[1]);
                std::lock_guard lock(e->mutex);
                res.status = 200;
                res.set_content(log_text(e->session), "application/x-ndjson");
            } catch (const StudyError& err) {
                error(res, err);
            }
        });
        srv.Post(R"(/sessions/([^/]+)/moves)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { return move(req); });
        });
        srv.Post(R"(/sessions/([^/]+)/questionnaire)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                const auto body = parse_body(req);
                if (!body.contains("likert") || !body["likert"].is_number_integer())
                    throw StudyError(StudyError::Kind::BadRequest, "bad_request", "body needs an integer 'likert'");
                auto e = find(req.matches[1]);
                std::lock_guard lock(e->mutex);
                study_.record_questionnaire(e->session, body["likert"].get<int>());
                return std::make_pair(200, session_state(e->session));
            });
        });
        srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty())
                reply(res, res.status, {{"code", res.status == 404 ? "not_found" : "error"}, {"message", "no such route"}});
        });
    }

    /// Event log of a session, for export and replay.
    [[nodiscard]] std::vector<std::string> events(const std::string& id) {
        auto e = find(id);
        std::lock_guard lock(e->mutex);
        return e->session.log;
    }

   private:
    struct Entry {
        std::mutex mutex;
        Session session;
    };

    static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void error(httplib::Response& res, const StudyError& err) {
        const int status = err.kind() == StudyError::Kind::NotFound   ? 404
                           : err.kind() == StudyError::Kind::Conflict ? 409
                                                                      : 400;
        reply(res, status, {{"code", err.code()}, {"message", err.what()}});
    }

    template <class F>
    static void handle(httplib::Response& res, F&& f) {
        try {
            auto [status, body] = f();
            reply(res, status, body);
        } catch (const StudyError& err) {
            error(res, err);
        } catch (const std::exception& err) {
            reply(res, 500, {{"code", "internal"}, {"message", err.what()}});
        }
    }

    static nlohmann::json parse_body(const httplib::Request& req) {
        auto j = nlohmann::json::parse(req.body, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw StudyError(StudyError::Kind::BadRequest, "bad_json", "request body must be a JSON object");
        return j;
    }

    std::shared_ptr<Entry> find(const std::string& id) {
        std::shared_lock lock(map_mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw StudyError(StudyError::Kind::NotFound, "unknown_session", "no session '" + id + "'");
        return it->second;
    }

    std::pair<int, nlohmann::json> create(const httplib::Request& req) {
        const auto body = parse_body(req);
        if (!body.contains("participant") || !body["participant"].is_string() || body["participant"].get<std::string>().empty())
            throw StudyError(StudyError::Kind::BadRequest, "bad_request", "body needs a non-empty 'participant'");
        if (!body.contains("condition") || !body["condition"].is_string())
            throw StudyError(StudyError::Kind::BadRequest, "bad_request", "body needs a 'condition'");
        const auto condition = condition_from_string(body["condition"].get<std::string>());
        if (!condition)
            throw StudyError(StudyError::Kind::BadRequest, "bad_condition", "condition must be none, hints, rga or rga+");
        if (!body.contains("day") || !body["day"].is_number_integer())
            throw StudyError(StudyError::Kind::BadRequest, "bad_request", "body needs an integer 'day'");

        char id[32];
        {
            std::unique_lock lock(map_mutex_);
            std::snprintf(id, sizeof id, "s%06llu", static_cast<unsigned long long>(next_id_++));
        }
        auto entry = std::make_shared<Entry>();
        entry->session = study_.create_session(id, body["participant"], *condition, body["day"].get<int>());
        const auto state = session_state(entry->session);
        std::unique_lock lock(map_mutex_);
        sessions_[id] = entry;
        return {201, state};
    }

    std::pair<int, nlohmann::json> move(const httplib::Request& req) {
        const auto body = parse_body(req);
        if (!body.contains("move") || !body["move"].is_string())
            throw StudyError(StudyError::Kind::BadRequest, "bad_request", "body needs a 'move' in long algebraic form");
        const bool confirm = body.value("confirm", false);
        std::optional<int> turn;
        if (body.contains("turn")) {
            if (!body["turn"].is_number_integer())
                throw StudyError(StudyError::Kind::BadRequest, "bad_request", "'turn' must be an integer");
            turn = body["turn"].get<int>();
        }
        auto e = find(req.matches[1]);
        std::lock_guard lock(e->mutex);
        const int game = body.contains("game") && body["game"].is_number_integer() ? body["game"].get<int>()
                                                                                   : e->session.current_game;
        const TurnOutcome t = study_.submit_move(e->session, game, body["move"].get<std::string>(), confirm, turn);
        return {200, {{"result", to_json(t)}, {"state", session_state(e->session)}}};
    }

    const Study& study_;
    std::shared_mutex map_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::uint64_t next_id_ = 1;
};

}  // namespace rgachess

#endif  // RGACHESS_SERVICE_HPP
