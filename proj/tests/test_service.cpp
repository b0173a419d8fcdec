#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <thread>

#include "rgachess/service.hpp"

using namespace rgachess;
using nlohmann::json;

namespace {

StudyConfig fast_config() {
    StudyConfig cfg;
    cfg.hint_depth = 3;
    cfg.opponent_depth = 2;
    cfg.max_player_moves = 3;
    return cfg;
}

const Study& study() {
    static const Study s(load_corpus(std::string(RGACHESS_DATA_DIR) + "/corpus/study.txt"), calibrate({30, 60, 120}, 7),
                         fast_config());
    return s;
}

// Service on an ephemeral port for the lifetime of the fixture.
struct Server {
    StudyService service{study()};
    httplib::Server srv;
    int port = 0;
    std::thread thread;

    Server() {
        service.attach(srv);
        port = srv.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { srv.listen_after_bind(); });
        srv.wait_until_ready();
    }
    ~Server() {
        srv.stop();
        thread.join();
    }

    [[nodiscard]] httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(60, 0);
        return c;
    }
};

struct Reply {
    int status;
    json body;
};

Reply post(httplib::Client& c, const std::string& path, const std::string& body) {
    auto r = c.Post(path, body, "application/json");
    REQUIRE(r);
    return {r->status, json::parse(r->body)};
}

Reply post(httplib::Client& c, const std::string& path, const json& body) { return post(c, path, body.dump()); }

Reply get(httplib::Client& c, const std::string& path) {
    auto r = c.Get(path);
    REQUIRE(r);
    return {r->status, json::parse(r->body)};
}

std::string create(httplib::Client& c, const std::string& condition, int day = 1) {
    const Reply r = post(c, "/sessions", json{{"participant", "p1"}, {"condition", condition}, {"day", day}});
    REQUIRE(r.status == 201);
    return r.body["id"];
}

// Plays the whole session over HTTP. Proposals that draw a caution are
// confirmed as-is; returns the number of cautions seen.
int play_out(httplib::Client& c, const std::string& id, bool worst) {
    int cautions = 0;
    for (;;) {
        const json state = get(c, "/sessions/" + id).body;
        if (state["finished"]) return cautions;
        const Position p = parse_fen(state["fen"].get<std::string>());
        const auto ranked = study().ranking(p);
        const std::string move = (worst ? ranked.front() : ranked.back()).move.uci();
        const json body{{"move", move}, {"turn", state["turn"]}, {"game", state["game"]}};
        Reply r = post(c, "/sessions/" + id + "/moves", body);
        REQUIRE(r.status == 200);
        if (!r.body["result"]["committed"]) {
            ++cautions;
            CHECK(r.body["state"]["pending_move"] == move);
            CHECK_FALSE(r.body["state"]["caution"].is_null());
            CHECK(r.body["result"]["caution"]["polarity"] == "cautionary");
            json confirm = body;
            confirm["confirm"] = true;
            r = post(c, "/sessions/" + id + "/moves", confirm);
            REQUIRE(r.status == 200);
            CHECK(r.body["result"]["committed"]);
            CHECK(r.body["state"]["pending_move"].is_null());
        }
    }
}

}  // namespace

TEST_CASE("health and routing") {
    Server s;
    auto c = s.client();
    const Reply h = get(c, "/health");
    CHECK(h.status == 200);
    CHECK(h.body["status"] == "ok");
    CHECK(h.body["version"] == kVersion);
    CHECK(h.body["boards"] == 27);
    const Reply missing = get(c, "/nowhere");
    CHECK(missing.status == 404);
    CHECK(missing.body["code"] == "not_found");
}

TEST_CASE("request validation") {
    Server s;
    auto c = s.client();
    auto expect = [&](const Reply& r, int status, const std::string& code) {
        CHECK(r.status == status);
        CHECK(r.body["code"] == code);
        CHECK(r.body["message"].is_string());
    };
    expect(post(c, "/sessions", std::string("{oops")), 400, "bad_json");
    expect(post(c, "/sessions", json{{"condition", "rga"}, {"day", 1}}), 400, "bad_request");
    expect(post(c, "/sessions", json{{"participant", "p"}, {"condition", "coach"}, {"day", 1}}), 400, "bad_condition");
    expect(post(c, "/sessions", json{{"participant", "p"}, {"condition", "rga"}, {"day", 9}}), 400, "bad_day");
    expect(get(c, "/sessions/s999999"), 404, "unknown_session");
    expect(post(c, "/sessions/s999999/moves", json{{"move", "e2e4"}}), 404, "unknown_session");

    const std::string id = create(c, "hints");
    expect(post(c, "/sessions/" + id + "/moves", json{{"mv", "e2e4"}}), 400, "bad_request");
    expect(post(c, "/sessions/" + id + "/moves", json{{"move", "e2e5"}}), 400, "illegal_move");
    expect(post(c, "/sessions/" + id + "/moves", json{{"move", "e2e4"}, {"game", 4}}), 409, "wrong_game");
    expect(post(c, "/sessions/" + id + "/questionnaire", json{{"likert", 3}}), 409, "session_incomplete");
    expect(post(c, "/sessions/" + id + "/questionnaire", json{{"likert", "3"}}), 400, "bad_request");
}

TEST_CASE("session state") {
    Server s;
    auto c = s.client();
    const Reply r = post(c, "/sessions", json{{"participant", "p1"}, {"condition", "rga+"}, {"day", 2}});
    REQUIRE(r.status == 201);
    const json& st = r.body;
    CHECK(st["condition"] == "rga+");
    CHECK(st["day"] == 2);
    CHECK(st["game"] == 0);
    CHECK(st["phase"] == "diagnostic");
    CHECK(st["turn"] == 1);
    CHECK(st["games_total"] == 9);
    CHECK(st["fen"] == study().corpus()[9].fen);
    CHECK(st["legal_moves"].size() == legal_moves(parse_fen(st["fen"].get<std::string>())).size());
    CHECK(st["guidance"]["highlight"].is_null());
    CHECK(get(c, "/sessions/" + st["id"].get<std::string>()).body == st);
}

TEST_CASE("retries with a turn number are idempotent") {
    Server s;
    auto c = s.client();
    const std::string id = create(c, "none");
    const json state = get(c, "/sessions/" + id).body;
    const std::string move = study().ranking(parse_fen(state["fen"].get<std::string>())).front().move.uci();
    const json body{{"move", move}, {"turn", 1}, {"game", 0}};
    const Reply first = post(c, "/sessions/" + id + "/moves", body);
    REQUIRE(first.status == 200);
    const auto events = c.Get("/sessions/" + id + "/events")->body;
    const Reply again = post(c, "/sessions/" + id + "/moves", body);
    CHECK(again.status == 200);
    CHECK(again.body["result"] == first.body["result"]);
    CHECK(c.Get("/sessions/" + id + "/events")->body == events);

    std::string other;
    for (const Move& m : legal_moves(parse_fen(state["fen"].get<std::string>())))
        if (m.uci() != move) other = m.uci();
    const Reply clash = post(c, "/sessions/" + id + "/moves", json{{"move", other}, {"turn", 1}, {"game", 0}});
    CHECK(clash.status == 409);
    CHECK(clash.body["code"] == "turn_taken");
}

TEST_CASE("full session with caution override, questionnaire and replay") {
    Server s;
    auto c = s.client();
    const std::string id = create(c, "rga");
    CHECK(play_out(c, id, true) > 0);

    const json done = get(c, "/sessions/" + id).body;
    CHECK(done["finished"]);
    CHECK(done["games_completed"] == 9);
    CHECK(done["legal_moves"].empty());
    const Reply q = post(c, "/sessions/" + id + "/questionnaire", json{{"likert", 4}});
    CHECK(q.status == 200);
    CHECK(q.body["questionnaire"] == 4);
    CHECK(post(c, "/sessions/" + id + "/questionnaire", json{{"likert", 4}}).status == 409);
    CHECK(post(c, "/sessions/" + id + "/moves", json{{"move", "e2e4"}}).body["code"] == "session_over");

    auto res = c.Get("/sessions/" + id + "/events");
    REQUIRE(res);
    CHECK(res->get_header_value("Content-Type") == "application/x-ndjson");
    std::vector<std::string> log;
    std::istringstream in(res->body);
    for (std::string line; std::getline(in, line);) log.push_back(line);
    CHECK(log == s.service.events(id));
    const Session replayed = study().replay(log);
    CHECK(session_state(replayed) == get(c, "/sessions/" + id).body);
    CHECK(log_text(replayed) == res->body);
}

TEST_CASE("concurrent sessions stay independent") {
    Server s;
    std::vector<std::string> ids;
    {
        auto c = s.client();
        for (const char* cond : {"none", "hints", "rga", "rga+"}) ids.push_back(create(c, cond, 3));
    }
    std::vector<std::thread> workers;
    for (const auto& id : ids)
        workers.emplace_back([&s, id] {
            auto c = s.client();
            play_out(c, id, false);
        });
    for (auto& w : workers) w.join();

    auto c = s.client();
    std::set<std::string> seen;
    for (const auto& id : ids) {
        const json st = get(c, "/sessions/" + id).body;
        CHECK(st["finished"]);
        seen.insert(id);
        const Session r = study().replay(s.service.events(id));
        CHECK(session_state(r) == st);
    }
    CHECK(seen.size() == ids.size());
    CHECK(get(c, "/health").body["sessions"] == 4);
}
