// rgachess command-line tool: calibration, annotation, simulation, corpus
// generation, perft and the HTTP study service.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>

#include "rgachess/rgachess.hpp"
#include "rgachess/service.hpp"

using namespace rgachess;

namespace {

const std::string kDataDir = RGACHESS_DATA_DIR;

std::vector<std::size_t> parse_schedule(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');) {
        std::size_t used = 0;
        const auto v = std::stoull(part, &used);
        if (used != part.size()) throw std::invalid_argument("bad schedule entry '" + part + "'");
        out.push_back(v);
    }
    return out;
}

PieceRange parse_range(const std::string& text) {
    const auto dash = text.find('-');
    if (dash == std::string::npos) throw std::invalid_argument("piece range must look like MIN-MAX");
    return {std::stoi(text.substr(0, dash)), std::stoi(text.substr(dash + 1))};
}

std::string score_text(const ScoredMove& s) {
    if (s.mate) return "mate " + std::to_string(*s.mate);
    return "cp " + std::to_string(s.score);
}

struct CommonStudyFlags {
    std::string corpus = kDataDir + "/corpus/study.txt";
    std::string table = kDataDir + "/calibration.txt";
    int hint_depth = 4;
    int opponent_depth = 6;
    int k = 2;
    std::string engine;
};

void add_study_flags(CLI::App* cmd, CommonStudyFlags& f) {
    cmd->add_option("--corpus", f.corpus, "Board corpus file")->envname("RGACHESS_CORPUS")->capture_default_str();
    cmd->add_option("--table", f.table, "Calibration table file")->envname("RGACHESS_TABLE")->capture_default_str();
    cmd->add_option("--hint-depth", f.hint_depth, "Search depth for hints and move ranking")->capture_default_str();
    cmd->add_option("--opponent-depth", f.opponent_depth, "Search depth of the opponent")->capture_default_str();
    cmd->add_option("-k", f.k, "Factors per rationale")->capture_default_str();
    cmd->add_option("--engine", f.engine, "External UCI engine executable")->envname("RGACHESS_ENGINE");
}

StudyConfig study_config(const CommonStudyFlags& f) {
    StudyConfig cfg;
    cfg.hint_depth = f.hint_depth;
    cfg.opponent_depth = f.opponent_depth;
    cfg.rga.k = f.k;
    return cfg;
}

/// Engine-backed search with a fallback to the internal evaluator when the
/// engine cannot rank moves. One handle, so calls are serialized here.
SearchBackend engine_backend(std::shared_ptr<Engine> engine) {
    auto lock = std::make_shared<std::mutex>();
    return {[engine, lock](const Position& p, int d) {
                std::lock_guard g(*lock);
                if (!engine->supports_multipv()) return rank_moves(p, d);
                return engine->rank_moves(p, d);
            },
            [engine, lock](const Position& p, int d) {
                std::lock_guard g(*lock);
                return engine->best_move(p, d);
            }};
}

SearchBackend make_backend(const CommonStudyFlags& f) {
    if (f.engine.empty()) return SearchBackend::internal();
    std::shared_ptr<Engine> e = Engine::connect(f.engine);
    std::cerr << "engine: " << e->name() << (e->supports_multipv() ? "" : " (no MultiPV; ranking stays internal)") << "\n";
    return engine_backend(std::move(e));
}

int cmd_calibrate(const std::string& schedule_text, std::uint64_t seed, const std::string& pieces, const std::string& out) {
    CalibrationOptions opt;
    opt.pieces = parse_range(pieces);
    const auto schedule = parse_schedule(schedule_text);
    const auto t = calibrate(schedule, seed, opt);
    save_calibration(t, out);
    std::printf("calibrated %zu positions (seed %llu) -> %s\n", schedule.back(), static_cast<unsigned long long>(seed),
                out.c_str());
    if (t.deltas.empty()) std::printf("single stage: no deltas\n");
    for (const auto& d : t.deltas) {
        double worst = 0;
        std::string worst_name;
        for (const auto& [name, v] : d.mean_delta) {
            const double rel = std::max(v, d.sd_delta.at(name)) / std::max(t.stats(name).sd, t.sigma_floor);
            if (rel >= worst) {
                worst = rel;
                worst_name = name;
            }
        }
        std::printf("stage %zu: max relative delta %.4f (%s) %s\n", d.samples, worst, worst_name.c_str(),
                    d.converged ? "converged" : "not converged");
        for (const auto& [name, v] : d.mean_delta)
            std::printf("  %-14s dmean %12.4f  dsd %12.4f\n", name.c_str(), v, d.sd_delta.at(name));
    }
    for (const auto& [name, s] : t.factors)
        std::printf("%-14s mean %12.4f  sd %12.4f%s\n", name.c_str(), s.mean, s.sd, s.sigma_floored ? "  (floored)" : "");
    return 0;
}

int cmd_annotate(const std::string& fen, int k, const std::string& variant, const std::string& table_path, int depth,
                 bool json) {
    Position p;
    try {
        p = parse_fen(fen);
    } catch (const FenError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (!has_legal_move(p)) {
        const auto kind = game_status(p).kind;
        std::cerr << "error: position is terminal ("
                  << (kind == GameStatusKind::Checkmate ? "checkmate" : kind == GameStatusKind::Stalemate ? "stalemate" : "draw")
                  << ")\n";
        return 2;
    }
    if (variant != "rga" && variant != "rga+") {
        std::cerr << "error: variant must be rga or rga+\n";
        return 2;
    }
    const CalibrationTable t = load_calibration(table_path);
    RGAConfig cfg;
    cfg.k = k;
    const auto ranked = rank_moves(p, depth);
    const ScoredMove& best = ranked.back();
    const Rationale r = explain_best_move(p, best.move, variant == "rga+" ? Variant::RGAPlus : Variant::RGA, cfg, t);

    if (json) {
        nlohmann::json out;
        out["fen"] = to_fen(p);
        out["depth"] = depth;
        out["best"] = {{"uci", best.move.uci()}, {"san", to_san(p, best.move)}, {"score", best.score},
                       {"mate", best.mate ? nlohmann::json(*best.mate) : nlohmann::json(nullptr)}};
        auto& list = out["ranking"] = nlohmann::json::array();
        for (auto it = ranked.rbegin(); it != ranked.rend(); ++it)
            list.push_back({{"uci", it->move.uci()},
                            {"san", to_san(p, it->move)},
                            {"score", it->score},
                            {"mate", it->mate ? nlohmann::json(*it->mate) : nlohmann::json(nullptr)},
                            {"rank", it->rank},
                            {"percentile", percentile_rank(ranked, it->move)}});
        out["rationale"] = to_json(r);
        std::cout << out.dump(2) << "\n";
        return 0;
    }
    std::printf("position:  %s\n", to_fen(p).c_str());
    std::printf("best move: %s (%s), %s\n", to_san(p, best.move).c_str(), best.move.uci().c_str(), score_text(best).c_str());
    std::printf("ranking at depth %d, %zu moves:\n", depth, ranked.size());
    for (auto it = ranked.rbegin(); it != ranked.rend(); ++it)
        std::printf("  %6.1f  %-8s %-6s %s\n", percentile_rank(ranked, it->move), to_san(p, it->move).c_str(),
                    it->move.uci().c_str(), score_text(*it).c_str());
    std::printf("rationale (%s, k=%d, templates v%s):\n", variant.c_str(), k, r.template_version.c_str());
    for (const auto& l : r.lines) std::printf("  %s\n", l.c_str());
    return 0;
}

int cmd_simulate(const std::string& policy_text, const std::string& condition_text, std::uint64_t seed,
                 const CommonStudyFlags& f, bool json, const std::string& log_dir) {
    const auto policy = policy_from_string(policy_text);
    if (!policy) {
        std::cerr << "error: unknown policy '" << policy_text << "'\n";
        return 2;
    }
    const auto condition = condition_from_string(condition_text);
    if (!condition) {
        std::cerr << "error: unknown condition '" << condition_text << "'\n";
        return 2;
    }
    const Study study(load_corpus(f.corpus), load_calibration(f.table), study_config(f), make_backend(f));
    const SimulationReport rep = simulate_agent(*policy, *condition, study, seed);
    if (!log_dir.empty()) {
        for (const auto& s : rep.sessions) {
            std::ofstream out(log_dir + "/" + s.id + ".ndjson", std::ios::binary);
            out << log_text(s);
        }
    }
    if (json) {
        std::cout << to_json(rep).dump(2) << "\n";
        return 0;
    }
    std::printf("policy %s, condition %s, seed %llu\n", rep.policy.c_str(), to_string(rep.condition).c_str(),
                static_cast<unsigned long long>(seed));
    for (const auto& d : rep.days)
        std::printf("day %d: win%% %.2f (diagnostic %.2f), mean percentile %.2f, W/T/L/M %llu/%llu/%llu/%llu, cautions %d\n",
                    d.day, d.win_percentage, d.diagnostic_win_percentage, d.mean_percentile,
                    static_cast<unsigned long long>(d.outcomes.wins), static_cast<unsigned long long>(d.outcomes.ties),
                    static_cast<unsigned long long>(d.outcomes.losses), static_cast<unsigned long long>(d.outcomes.maxmoves),
                    d.cautions);
    std::printf("overall: win%% %.2f, mean percentile %.2f\n", rep.win_percentage, rep.mean_percentile);
    return 0;
}

httplib::Server* g_server = nullptr;

int cmd_serve(const std::string& host, int port, const CommonStudyFlags& f) {
    const Study study(load_corpus(f.corpus), load_calibration(f.table), study_config(f), make_backend(f));
    StudyService service(study);
    httplib::Server srv;
    service.attach(srv);
    g_server = &srv;
    std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
    });
    std::printf("serving %zu boards on http://%s:%d\n", study.corpus().size(), host.c_str(), port);
    std::fflush(stdout);
    if (!srv.listen(host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return 1;
    }
    return 0;
}

int cmd_replay(const std::string& log_path, const CommonStudyFlags& f) {
    std::ifstream in(log_path);
    if (!in) {
        std::cerr << "error: cannot open " << log_path << "\n";
        return 1;
    }
    std::vector<std::string> log;
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) log.push_back(l);
    const Study study(load_corpus(f.corpus), load_calibration(f.table), study_config(f), make_backend(f));
    const Session s = study.replay(log);
    std::cout << session_state(s).dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chess rationale coaching toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    auto* calib = app.add_subcommand("calibrate", "Build a factor calibration table");
    std::string schedule = "30,60,120", pieces = "2-32", out;
    std::uint64_t seed = 7;
    calib->add_option("--schedule", schedule, "Comma-separated nested sample sizes")->capture_default_str();
    calib->add_option("--seed", seed, "Random seed")->capture_default_str();
    calib->add_option("--pieces", pieces, "Piece-count range MIN-MAX")->capture_default_str();
    calib->add_option("--out,-o", out, "Output table path")->required();

    auto* annotate = app.add_subcommand("annotate", "Rank moves and explain the best one");
    std::string fen, variant = "rga+", table = kDataDir + "/calibration.txt";
    int k = 2, depth = 4;
    bool json = false;
    annotate->add_option("fen", fen, "Position in FEN")->required();
    annotate->add_option("-k", k, "Factors per rationale")->capture_default_str()->check(CLI::PositiveNumber);
    annotate->add_option("--variant", variant, "rga or rga+")->capture_default_str();
    annotate->add_option("--table", table, "Calibration table")->envname("RGACHESS_TABLE")->capture_default_str();
    annotate->add_option("--depth", depth, "Search depth")->capture_default_str()->check(CLI::PositiveNumber);
    annotate->add_flag("--json", json, "Machine-readable output");

    auto* simulate = app.add_subcommand("simulate", "Run a scripted agent through the study");
    CommonStudyFlags sim_flags;
    std::string policy = "random-legal", condition = "none", log_dir;
    std::uint64_t sim_seed = 1;
    simulate->add_option("--policy", policy, "random-legal, hint-follower(P) or caution-aware")->capture_default_str();
    simulate->add_option("--condition", condition, "none, hints, rga or rga+")->capture_default_str();
    simulate->add_option("--seed", sim_seed, "Random seed")->capture_default_str();
    simulate->add_option("--logs", log_dir, "Directory for per-day event logs");
    simulate->add_flag("--json", json, "Machine-readable output");
    add_study_flags(simulate, sim_flags);

    auto* serve = app.add_subcommand("serve", "Run the HTTP study service");
    CommonStudyFlags serve_flags;
    std::string host = "127.0.0.1";
    int port = 8080;
    serve->add_option("--host", host, "Bind address")->envname("RGACHESS_HOST")->capture_default_str();
    serve->add_option("--port", port, "Port")->envname("RGACHESS_PORT")->capture_default_str();
    add_study_flags(serve, serve_flags);

    auto* replay = app.add_subcommand("replay", "Rebuild a session from its event log");
    CommonStudyFlags replay_flags;
    std::string log_path;
    replay->add_option("log", log_path, "Event log (one JSON record per line)")->required();
    add_study_flags(replay, replay_flags);

    auto* gen = app.add_subcommand("gen-corpus", "Generate forced-win boards for white");
    std::size_t count = 27;
    std::uint64_t gen_seed = 1;
    std::string gen_pieces = "6-12", gen_out, hint_line;
    int max_mate = 3;
    gen->add_option("--count", count, "Number of boards")->capture_default_str();
    gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
    gen->add_option("--pieces", gen_pieces, "Piece-count range MIN-MAX")->capture_default_str();
    gen->add_option("--max-mate", max_mate, "Largest forced-mate distance")->capture_default_str();
    gen->add_option("--hint-line", hint_line, "HINT,OPPONENT depths; keep boards the top-ranked line wins");
    gen->add_option("--out,-o", gen_out, "Output corpus path (default stdout)");

    auto* perft_cmd = app.add_subcommand("perft", "Count leaf nodes of the legal move tree");
    std::string perft_fen = std::string(kStartFen);
    int perft_depth = 3;
    perft_cmd->add_option("--fen", perft_fen, "Position in FEN");
    perft_cmd->add_option("depth", perft_depth, "Depth in plies")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*calib) return cmd_calibrate(schedule, seed, pieces, out);
        if (*annotate) return cmd_annotate(fen, k, variant, table, depth, json);
        if (*simulate) return cmd_simulate(policy, condition, sim_seed, sim_flags, json, log_dir);
        if (*serve) return cmd_serve(host, port, serve_flags);
        if (*replay) return cmd_replay(log_path, replay_flags);
        if (*gen) {
            BoardGenOptions opt;
            opt.pieces = parse_range(gen_pieces);
            opt.max_mate = max_mate;
            if (!hint_line.empty()) {
                const auto depths = parse_schedule(hint_line);
                if (depths.size() != 2) throw std::invalid_argument("--hint-line takes HINT,OPPONENT");
                opt.hint_line = std::make_pair(static_cast<int>(depths[0]), static_cast<int>(depths[1]));
            }
            const std::string text = serialize_corpus(generate_boards(count, gen_seed, opt));
            if (gen_out.empty()) {
                std::cout << text;
            } else {
                std::ofstream o(gen_out, std::ios::binary);
                if (!(o << text)) throw std::runtime_error("cannot write " + gen_out);
            }
            return 0;
        }
        if (*perft_cmd) {
            std::printf("%llu\n", static_cast<unsigned long long>(perft(parse_fen(perft_fen), perft_depth)));
            return 0;
        }
    } catch (const FenError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
