// Acceptance gate: one PASS/FAIL line per criterion; exits non-zero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <thread>

#include "rgachess/rgachess.hpp"
#include "rgachess/service.hpp"
#include "support/oracles.hpp"

using namespace rgachess;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kData = RGACHESS_DATA_DIR;
const std::string kTestData = RGACHESS_TEST_DATA_DIR;

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void criterion(const char* id, const std::function<std::string()>& body) {
    const auto t0 = Clock::now();
    std::string detail;
    bool ok = true;
    try {
        detail = body();
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.2fs", seconds_since(t0));
    std::printf("%s %s: %s [%s]\n", ok ? "PASS" : "FAIL", id, detail.c_str(), timing);
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::vector<std::string> corpus_fens() {
    std::vector<std::string> out;
    for (const char* name : {"study.txt", "forced_wins.txt"})
        for (const auto& b : load_corpus(kData + "/corpus/" + name)) out.push_back(b.fen);
    return out;
}

std::string movegen() {
    const auto t0 = Clock::now();
    const Position start = start_position();
    const std::uint64_t expected[] = {20, 400, 8902};
    for (int d = 1; d <= 3; ++d)
        expect(perft(start, d) == expected[d - 1], "start position perft " + std::to_string(d));
    const double secs = seconds_since(t0);
    expect(secs < 1.0, "start perft took " + std::to_string(secs) + "s");

    std::uint64_t nodes = 0;
    for (std::uint64_t i = 0; i < 10; ++i) {
        const Position p = random_position({2, 32}, derive_seed(424242, i));
        const std::string fen = to_fen(p);
        for (int d = 1; d <= 3; ++d) {
            const auto lib = perft(p, d);
            expect(lib == naive::perft(naive::from_fen(fen), d), fen + " depth " + std::to_string(d));
            nodes += lib;
        }
    }
    return "start 20/400/8902; 10 random positions match the naive generator (" + std::to_string(nodes) + " nodes)";
}

std::string fen_round_trip() {
    std::size_t n = 0;
    for (const auto& fen : corpus_fens()) {
        expect(to_fen(parse_fen(fen)) == fen, fen);
        ++n;
    }
    for (std::uint64_t i = 0; i < 200; ++i) {
        const Position p = random_position({2, 32}, derive_seed(77, i));
        const std::string fen = to_fen(p);
        expect(to_fen(parse_fen(fen)) == fen && parse_fen(fen) == p, fen);
        ++n;
    }
    return std::to_string(n) + " positions";
}

std::string eq1() {
    expect(win_percentage(OutcomeCounts{6, 0, 0, 0}) == 100.0, "all wins");
    expect(win_percentage(OutcomeCounts{0, 0, 6, 0}) == 0.0, "all losses");
    expect(win_percentage(OutcomeCounts{2, 1, 2, 1}) == 50.0, "2W 1T 1M 2L");
    expect(win_percentage(OutcomeCounts{1, 1, 0, 0}) == 75.0, "1W 1T");

    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<std::uint64_t> count(0, 15);
    for (int trial = 0; trial < 1000; ++trial) {
        OutcomeCounts c{count(rng), count(rng), count(rng) + 1, count(rng)};
        // Rational oracle: reduce (2w + t + m) / (2n) and scale by 100.
        const std::uint64_t num = 2 * c.wins + c.ties + c.maxmoves, den = 2 * (c.wins + c.ties + c.losses + c.maxmoves);
        const std::uint64_t g = std::gcd(num, den);
        const double exact = 100.0 * static_cast<double>(num / g) / static_cast<double>(den / g);
        const double w = win_percentage(c);
        expect(std::abs(w - exact) <= 1e-12, "trial " + std::to_string(trial));
        OutcomeCounts better = c;
        --better.losses;
        ++better.ties;
        expect(win_percentage(better) >= w, "tie-for-loss decreased Win% at trial " + std::to_string(trial));
    }
    return "endpoints and mixed cases exact; 1000 multisets monotone";
}

std::vector<ScoredMove> ranking_of(const std::vector<int>& scores) {
    std::vector<ScoredMove> r;
    for (std::size_t i = 0; i < scores.size(); ++i)
        r.push_back({Move{static_cast<Square>(i), static_cast<Square>(63 - i)}, scores[i], std::nullopt, 0});
    std::stable_sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
    assign_mid_ranks(r);
    return r;
}

std::string eq2() {
    std::vector<int> s41(41);
    std::iota(s41.begin(), s41.end(), 0);
    const auto r = ranking_of(s41);
    expect(percentile_rank(r, r.front().move) == 0.0, "worst of 41");
    expect(percentile_rank(r, r.back().move) == 100.0, "best of 41");
    expect(percentile_rank(r, r[20].move) == 50.0, "k=21 of 41");
    const auto tied = ranking_of({1, 2, 5, 5, 9});
    expect(percentile_rank(tied, tied[2].move) == 62.5 && percentile_rank(tied, tied[3].move) == 62.5, "mid-rank tie");
    const auto one = ranking_of({3});
    expect(percentile_rank(one, one[0].move) == 100.0, "N=1");

    std::mt19937_64 rng(2002);
    std::uniform_int_distribution<int> size(1, 40), score(-15, 15);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<int> scores(static_cast<std::size_t>(size(rng)));
        for (auto& x : scores) x = score(rng);
        const auto rr = ranking_of(scores);
        for (const auto& a : rr)
            for (const auto& b : rr) {
                const double pa = percentile_rank(rr, a.move), pb = percentile_rank(rr, b.move);
                if (a.score < b.score) expect(pa < pb, "monotonicity");
                if (a.score == b.score) expect(pa == pb, "equal scores");
                expect(pa == oracle::percentile(rr, a.move), "independent rank routine");
            }
    }
    return "endpoints, midpoint, 62.5 tie, N=1 exact; 500 random rankings monotone";
}

std::string calibration_self_normalization() {
    const auto t0 = Clock::now();
    const auto t = calibrate({30, 60, 120}, 7);
    const auto sample = calibration_sample(120, 7);
    double worst_mean = 0, worst_sd = 0;
    int checked = 0;
    for (UtilityFactor f : kUtilityFactors) {
        if (t.stats(name_of(f)).sigma_floored) continue;
        long double sum = 0, sq = 0;
        std::vector<double> z;
        for (const auto& fv : sample) z.push_back(zscore(fv, t)[static_cast<std::size_t>(f)].z);
        for (double v : z) sum += v;
        const long double mean = sum / z.size();
        for (double v : z) sq += (v - mean) * (v - mean);
        const double sd = std::sqrt(static_cast<double>(sq / z.size()));
        worst_mean = std::max(worst_mean, std::abs(static_cast<double>(mean)));
        worst_sd = std::max(worst_sd, std::abs(sd - 1.0));
        ++checked;
    }
    expect(worst_mean <= 1e-9 && worst_sd <= 1e-9, "self-normalization off by " + std::to_string(worst_mean) + " / " +
                                                       std::to_string(worst_sd));
    CalibrationOptions one, many;
    one.threads = 1;
    many.threads = 4;
    expect(serialize(calibrate({30, 60, 120}, 7, one)) == serialize(t), "rerun differs");
    expect(serialize(calibrate({30, 60, 120}, 7, many)) == serialize(t), "threaded run differs");
    const double secs = seconds_since(t0);
    expect(secs < 30.0, "took " + std::to_string(secs) + "s");
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d factors, max |mean| %.2e, max |sd-1| %.2e, bitwise reproducible", checked,
                  worst_mean, worst_sd);
    return buf;
}

std::string domain_detectors() {
    const auto t0 = Clock::now();
    std::ifstream in(kTestData + "/endgames.txt");
    int positions = 0, moves = 0;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') continue;
        const std::string fen = line.substr(0, line.find(" ; "));
        const Position p = parse_fen(fen);
        const naive::Board b = naive::from_fen(fen);
        const auto want = oracle::mate_distance(fen, 3);
        const auto got = detect_mate_within(p, 3);
        expect(got.has_value() == want.has_value() && (!got || got->mate_in == want), fen + " mate distance");
        for (const auto& nm : naive::moves(b)) {
            const Move m = parse_uci_move(p, naive::text(nm));
            const naive::Board after = naive::play(b, nm);
            const bool check = naive::king_attacked(after, after.white);
            const bool mate = check && naive::moves(after).empty();
            expect(detect_check_next(p, m).has_value() == (check && !mate), fen + " check " + m.uci());
            expect(detect_capture_next(p, m).has_value() == (nm.ep || b.sq[nm.tr][nm.tf] != '.'), fen + " capture " + m.uci());
            ++moves;
        }
        expect(legal_moves(p).size() == naive::moves(b).size(), fen + " move count");
        ++positions;
    }
    expect(positions == 20, "expected 20 curated positions, found " + std::to_string(positions));
    const double secs = seconds_since(t0);
    expect(secs < 60.0, "took " + std::to_string(secs) + "s");
    return std::to_string(positions) + " positions, " + std::to_string(moves) + " moves agree";
}

std::string top_k_selection() {
    std::mt19937_64 rng(3003);
    std::uniform_int_distribution<int> weight(-600, 600), kdist(1, 6), coin(0, 1);
    std::uniform_real_distribution<double> mean(-100, 100), sd(0.5, 200);
    const Position p = parse_fen("8/5k2/8/3K4/8/2R5/1P6/8 w - - 0 1");
    const Move a = parse_uci_move(p, "c3c7");
    const DomainFactorKind kinds[] = {DomainFactorKind::CaptureNextMove, DomainFactorKind::CheckNextMove,
                                      DomainFactorKind::MateSoon};
    for (int trial = 0; trial < 1000; ++trial) {
        CalibrationTable t;
        for (auto name : kUtilityFactorNames) t.factors[std::string(name)] = {mean(rng), sd(rng), 100, false};
        FactorVector fv;
        for (UtilityFactor f : kUtilityFactors) fv[f] = weight(rng);
        std::vector<DomainFactor> d;
        for (auto k : kinds)
            if (coin(rng)) d.push_back({k, PieceType::Pawn, 2, true});
        RGAConfig cfg;
        cfg.k = kdist(rng);
        const bool plus = coin(rng);
        const auto r = generate_rationale(fv, a, plus ? std::optional(d) : std::nullopt, cfg, t, p);

        std::vector<oracle::Candidate> all;
        for (UtilityFactor f : kUtilityFactors) {
            const auto& s = t.factors.at(std::string(name_of(f)));
            all.push_back({std::string(name_of(f)), false, 0, std::abs((static_cast<double>(fv[f]) - s.mean) / s.sd)});
        }
        if (plus)
            for (const auto& df : d) all.push_back({std::string(name_of(df.kind)), true, static_cast<int>(df.kind), 0});
        std::vector<std::string> got;
        bool seen_utility = false;
        for (const auto& f : r.factors) {
            got.push_back(f.name);
            if (f.source == FactorSource::Utility) seen_utility = true;
            else expect(!seen_utility, "domain after utility at trial " + std::to_string(trial));
            if (!plus) expect(f.source == FactorSource::Utility, "domain factor in RGA at trial " + std::to_string(trial));
        }
        expect(got == oracle::brute_force_top_k(all, cfg.k), "selection differs at trial " + std::to_string(trial));
    }
    return "1000 multisets match brute force";
}

std::string cautionary_rule() {
    const RGAConfig cfg;
    int fired = 0, quiet = 0;
    for (std::uint64_t i = 0; i < 50; ++i) {
        const Position p = random_position({4, 12}, derive_seed(5005, i));
        const auto ranking = rank_moves(p, 2);
        for (const auto& s : ranking) {
            const bool want = oracle::percentile(ranking, s.move) < 100.0 / 3.0;
            const bool got = detect_non_optimal(ranking, s.move, cfg).has_value();
            expect(got == want, to_fen(p) + " " + s.move.uci());
            (got ? fired : quiet) += 1;
        }
    }
    expect(fired > 0 && quiet > 0, "degenerate sample");
    return "50 positions: " + std::to_string(fired) + " fired, " + std::to_string(quiet) + " quiet";
}

StudyConfig depth(int hint, int opponent, int cap = 10) {
    StudyConfig cfg;
    cfg.hint_depth = hint;
    cfg.opponent_depth = opponent;
    cfg.max_player_moves = cap;
    return cfg;
}

std::string gating(const CalibrationTable& table) {
    const Study st(load_corpus(kData + "/corpus/study.txt"), table, depth(3, 2, 4));
    int guidance_events = 0, cautions = 0;
    for (Condition c : {Condition::None, Condition::Hints, Condition::RGA, Condition::RGAPlus}) {
        const auto rep = simulate_agent(Policy::random_legal(), c, st, 9);
        for (const auto& s : rep.sessions) {
            std::set<int> guided_games;
            for (const auto& line : s.log) {
                const json e = json::parse(line);
                const std::string type = e["type"];
                if (type != "guidance_shown" && type != "caution_shown") continue;
                const int game = e["game"];
                const std::string where = to_string(c) + " day " + std::to_string(s.day) + " game " + std::to_string(game);
                expect(phase_of_game(game) == Phase::Instructional, "guidance in diagnostic " + where);
                if (type == "caution_shown") {
                    expect(c == Condition::RGA || c == Condition::RGAPlus, "caution under " + where);
                    ++cautions;
                    continue;
                }
                expect(c != Condition::None, "guidance under " + where);
                expect(e["highlight"].is_string(), "missing highlight " + where);
                if (c == Condition::Hints) {
                    expect(e["rationale"].is_null(), "rationale under hints " + where);
                } else {
                    expect(e["rationale"]["variant"] == (c == Condition::RGAPlus ? "rga+" : "rga"), "variant " + where);
                    expect(!e["rationale"]["lines"].empty(), "empty rationale " + where);
                    if (c == Condition::RGA)
                        for (const auto& f : e["rationale"]["factors"])
                            expect(f["source"] == "utility", "domain factor under rga " + where);
                }
                guided_games.insert(game);
                ++guidance_events;
            }
            if (c != Condition::None)
                expect(guided_games == std::set<int>{3, 4, 5}, "instructional games without guidance under " + to_string(c));
        }
    }
    return "4 conditions x 3 days: " + std::to_string(guidance_events) + " guidance and " + std::to_string(cautions) +
           " caution events, none in diagnostic games";
}

std::string behavioral(const CalibrationTable& table) {
    const auto t0 = Clock::now();
    const auto boards = load_corpus(kData + "/corpus/forced_wins.txt");
    expect(boards.size() >= 54, "corpus holds " + std::to_string(boards.size()) + " boards");
    for (const auto& b : boards) expect(b.optimal_moves < 5, "board beyond O<5");

    OutcomeCounts hint, random;
    double pr_sum = 0;
    int pr_n = 0;
    for (std::size_t half = 0; half < 2; ++half) {
        std::vector<BoardTask> part(boards.begin() + static_cast<std::ptrdiff_t>(half * 27),
                                    boards.begin() + static_cast<std::ptrdiff_t>(half * 27 + 27));
        const Study st(part, table, depth(3, 3));
        const auto h = simulate_agent(Policy::hint_follower(1.0), Condition::None, st, 17);
        const auto r = simulate_agent(Policy::random_legal(), Condition::None, st, 17);
        for (const auto& s : h.sessions)
            for (const auto& g : s.games) {
                hint.add(g.outcome);
                for (const auto& t : g.turns) {
                    pr_sum += t.percentile;
                    ++pr_n;
                }
            }
        for (const auto& s : r.sessions)
            for (const auto& g : s.games) random.add(g.outcome);
    }
    const double hw = win_percentage(hint), rw = win_percentage(random), pr = pr_sum / pr_n;
    char buf[200];
    std::snprintf(buf, sizeof buf, "%llu boards: hint-follower Win%% %.2f PR %.2f, random Win%% %.2f (gap %.2f)",
                  static_cast<unsigned long long>(hint.total()), hw, pr, rw, hw - rw);
    expect(hw == 100.0, buf);
    expect(pr == 100.0, buf);
    expect(hw - rw >= 20.0, buf);
    const double secs = seconds_since(t0);
    expect(secs < 300.0, "took " + std::to_string(secs) + "s");
    return buf;
}

std::string api_contract(const CalibrationTable& table) {
    const Study st(load_corpus(kData + "/corpus/study.txt"), table, depth(3, 2, 4));
    StudyService service(st);
    httplib::Server srv;
    service.attach(srv);
    const int port = srv.bind_to_any_port("127.0.0.1");
    std::thread th([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();
    struct Stop {
        httplib::Server& s;
        std::thread& t;
        ~Stop() {
            s.stop();
            t.join();
        }
    } stop{srv, th};

    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(120, 0);
    auto call = [&](const std::string& method, const std::string& path, const json& body = nullptr) {
        auto res = method == "GET" ? c.Get(path) : c.Post(path, body.dump(), "application/json");
        if (!res) throw Failure(method + " " + path + ": no response");
        return std::make_pair(res->status, res->body);
    };
    auto [cs, cb] = call("POST", "/sessions", {{"participant", "acceptance"}, {"condition", "rga+"}, {"day", 1}});
    expect(cs == 201, "create returned " + std::to_string(cs));
    const std::string id = json::parse(cb)["id"];
    const std::string base = "/sessions/" + id;

    int overrides = 0, moves = 0;
    for (;;) {
        const json state = json::parse(call("GET", base).second);
        if (state["finished"]) break;
        const auto ranked = st.ranking(parse_fen(state["fen"].get<std::string>()));
        std::string move = ranked.back().move.uci();
        const bool try_override = overrides == 0 && state["phase"] == "instructional";
        if (try_override)
            if (const auto& w = ranked.front(); percentile_rank(ranked, w.move) < 100.0 / 3.0) move = w.move.uci();
        json body{{"move", move}, {"turn", state["turn"]}, {"game", state["game"]}};
        auto [s1, b1] = call("POST", base + "/moves", body);
        expect(s1 == 200, "move returned " + std::to_string(s1) + ": " + b1);
        json r = json::parse(b1);
        if (!r["result"]["committed"]) {
            expect(!r["result"]["caution"].is_null(), "uncommitted move without caution");
            body["confirm"] = true;
            auto [s2, b2] = call("POST", base + "/moves", body);
            expect(s2 == 200, "confirm returned " + std::to_string(s2));
            r = json::parse(b2);
            expect(r["result"]["committed"] && r["result"]["move"] == move, "override did not commit");
            ++overrides;
        }
        ++moves;
        expect(moves < 200, "session does not terminate");
    }
    expect(overrides >= 1, "no caution/override cycle happened");
    auto [qs, qb] = call("POST", base + "/questionnaire", {{"likert", 4}});
    expect(qs == 200, "questionnaire returned " + std::to_string(qs));

    const json final_state = json::parse(call("GET", base).second);
    expect(final_state["finished"] && final_state["questionnaire"] == 4, "final state incomplete");
    const std::string ndjson = call("GET", base + "/events").second;
    std::vector<std::string> log;
    std::istringstream in(ndjson);
    for (std::string line; std::getline(in, line);) log.push_back(line);
    const Session replayed = st.replay(log);
    expect(session_state(replayed) == final_state, "replayed state differs");
    expect(log_text(replayed) == ndjson, "replayed log differs");
    return std::to_string(moves) + " moves over HTTP, " + std::to_string(overrides) + " override, " +
           std::to_string(log.size()) + " events replayed to an identical state";
}

}  // namespace

int main() {
    criterion("movegen-perft", movegen);
    criterion("fen-round-trip", fen_round_trip);
    criterion("win-percentage", eq1);
    criterion("percentile-rank", eq2);
    criterion("calibration-self-normalization", calibration_self_normalization);
    criterion("domain-detectors", domain_detectors);
    criterion("top-k-selection", top_k_selection);
    criterion("cautionary-rule", cautionary_rule);
    const CalibrationTable table = load_calibration(kData + "/calibration.txt");
    criterion("condition-gating", [&] { return gating(table); });
    criterion("behavioral-sanity", [&] { return behavioral(table); });
    criterion("api-contract", [&] { return api_contract(table); });
    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
