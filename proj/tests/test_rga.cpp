#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>

#include "rgachess/rga.hpp"
#include "support/oracles.hpp"

using namespace rgachess;

namespace {

CalibrationTable unit_table() {
    CalibrationTable t;
    for (auto name : kUtilityFactorNames) t.factors[std::string(name)] = {0.0, 1.0, 2, false};
    return t;
}

const CalibrationTable& real_table() {
    static const CalibrationTable t = calibrate({30, 60, 120}, 7);
    return t;
}

FactorVector vec(std::initializer_list<std::pair<UtilityFactor, std::int64_t>> entries) {
    FactorVector v;
    for (auto [f, w] : entries) v[f] = w;
    return v;
}

}  // namespace

TEST_CASE("template registry") {
    const auto& builtin = TemplateRegistry::builtin();
    CHECK(builtin.version() == "1");
    CHECK(TemplateRegistry::load(std::string(RGACHESS_DATA_DIR) + "/templates.txt") == builtin);
    for (auto name : kUtilityFactorNames) {
        CHECK(builtin.has(std::string(name), true));
        CHECK(builtin.has(std::string(name), false));
    }
    for (auto k : {DomainFactorKind::MateSoon, DomainFactorKind::CheckNextMove, DomainFactorKind::CaptureNextMove}) {
        CHECK(builtin.has(std::string(name_of(k)), true));
        CHECK(builtin.has(std::string(name_of(k)), false));
    }
    CHECK(builtin.render("MateSoon", true, "Qh7#", 1) == "Qh7# leads to checkmate in 1 move(s).");
    CHECK(builtin.render("CaptureNextMove", true, "Rxd5", std::nullopt, PieceType::Knight) == "Rxd5 captures a knight.");

    CHECK_THROWS_AS(TemplateRegistry::parse("Material+ = x\n"), TemplateError);
    CHECK_THROWS_AS(TemplateRegistry::parse("version = 2\nMaterial = x\n"), TemplateError);
    const auto bad = TemplateRegistry::parse("version = 2\nMaterial+ = {move} {oops}\n");
    CHECK_THROWS_AS(bad.render("Material", true, "e4"), TemplateError);
    CHECK_THROWS_AS(bad.render("Material", false, "e4"), TemplateError);

    RGAConfig cfg;
    cfg.template_version = "2";
    const Position p = start_position();
    CHECK_THROWS_AS(generate_rationale(FactorVector{}, parse_uci_move(p, "e2e4"), std::nullopt, cfg, unit_table(), p),
                    TemplateError);
}

TEST_CASE("decompose_utility") {
    SECTION("all zero against a zero-mean table") {
        for (const Factor& f : decompose_utility(FactorVector{}, unit_table(), Color::White)) {
            CHECK(f.weight == 0.0);
            CHECK(f.positive);
            CHECK(f.source == FactorSource::Utility);
        }
    }
    SECTION("perspective flip") {
        const auto fs = decompose_utility(vec({{UtilityFactor::Mobility, 50}}), unit_table(), Color::Black);
        CHECK(fs[static_cast<std::size_t>(UtilityFactor::Mobility)].weight == -50.0);
        CHECK_FALSE(fs[static_cast<std::size_t>(UtilityFactor::Mobility)].positive);
    }
    SECTION("negative z keeps its magnitude") {
        CalibrationTable t = unit_table();
        t.factors["Passed"] = {10.0, 5.0, 2, false};
        const auto fs = decompose_utility(vec({{UtilityFactor::Passed, -2}}), t, Color::White);
        const Factor& f = fs[static_cast<std::size_t>(UtilityFactor::Passed)];
        CHECK(f.weight == Catch::Approx(-2.4));
        CHECK_FALSE(f.positive);
    }
    SECTION("names and weights are exactly the zscore output") {
        const FactorVector fv = compute_factors(parse_fen("8/5k2/8/3K4/8/2R5/1P6/8 w - - 0 1"));
        const auto z = zscore(fv, real_table());
        const auto fs = decompose_utility(fv, real_table(), Color::White);
        REQUIRE(z.size() == fs.size());
        for (std::size_t i = 0; i < z.size(); ++i) {
            CHECK(fs[i].name == z[i].name);
            CHECK(fs[i].weight == z[i].z);
        }
    }
}

TEST_CASE("merge_and_rank") {
    auto util = [](std::string name, double z) {
        Factor f;
        f.name = std::move(name);
        f.weight = z;
        f.positive = z >= 0;
        return f;
    };
    auto dom = [](DomainFactorKind k) { return to_factor(DomainFactor{k}); };
    auto names = [](const std::vector<Factor>& fs) {
        std::vector<std::string> out;
        for (const auto& f : fs) out.push_back(f.name);
        return out;
    };
    CHECK(names(merge_and_rank({util("Mobility", 1.2), util("Passed", -2.0)}, {dom(DomainFactorKind::CheckNextMove)})) ==
          std::vector<std::string>{"CheckNextMove", "Passed", "Mobility"});
    CHECK(names(merge_and_rank({util("Mobility", 1.2), util("Passed", -2.0), util("King", 0.1)}, {})) ==
          std::vector<std::string>{"Passed", "Mobility", "King"});
    CHECK(names(merge_and_rank({}, {dom(DomainFactorKind::CaptureNextMove), dom(DomainFactorKind::MateSoon)})) ==
          std::vector<std::string>{"MateSoon", "CaptureNextMove"});
    CHECK(names(merge_and_rank({util("Threats", 1.0), util("King", -1.0)}, {})) ==
          std::vector<std::string>{"King", "Threats"});
    CHECK_THROWS(top_k({}, 0));
}

TEST_CASE("generate_rationale examples") {
    SECTION("promotion line names the move") {
        const Position p = parse_fen("8/P7/8/4k3/8/8/8/K7 w - - 0 1");
        const Move m = parse_uci_move(p, "a7a8q");
        RGAConfig cfg;
        cfg.k = 1;
        const auto r = generate_rationale(vec({{UtilityFactor::PawnPromotion, 5}, {UtilityFactor::Material, 1}}), m,
                                          std::nullopt, cfg, unit_table(), p);
        REQUIRE(r.lines.size() == 1);
        CHECK(r.factors[0].name == "PawnPromotion");
        CHECK(r.lines[0] == "a8=Q pushes your pawn toward promotion; a new queen is within reach.");
        CHECK(r.move_san == "a8=Q");
        CHECK(r.variant == Variant::RGA);
        CHECK(r.polarity == Polarity::BestMove);
    }
    SECTION("mate line comes first under RGA+") {
        const Position p = parse_fen("6k1/5ppp/8/8/8/8/P7/4R1K1 w - - 0 1");
        const Move best = best_move(p, 3).move;
        REQUIRE(best.uci() == "e1e8");
        const auto d = domain_factors(p, best);
        const auto fv = compute_factors(apply_move(p, best));
        const auto plus = generate_rationale(fv, best, d, RGAConfig{}, real_table(), p);
        REQUIRE(plus.lines.size() == 2);
        CHECK(plus.factors[0].name == "MateSoon");
        CHECK(plus.lines[0] == "Re8# leads to checkmate in 1 move(s).");
        CHECK(plus.factors[1].source == FactorSource::Utility);
        CHECK(plus.variant == Variant::RGAPlus);

        const auto plain = generate_rationale(fv, best, std::nullopt, RGAConfig{}, real_table(), p);
        for (const auto& f : plain.factors) CHECK(f.source == FactorSource::Utility);
        CHECK(plain.factors[0] == plus.factors[1]);
        CHECK(generate_rationale(fv, best, d, RGAConfig{}, real_table(), p) == plus);
    }
}

TEST_CASE("top-k selection matches brute force over random factor multisets") {
    std::mt19937_64 rng(20240611);
    std::uniform_int_distribution<int> weight(-600, 600), kdist(1, 6), coin(0, 1);
    std::uniform_real_distribution<double> mean(-100, 100), sd(0.5, 200);
    const Position p = parse_fen("8/5k2/8/3K4/8/2R5/1P6/8 w - - 0 1");
    const Move a = parse_uci_move(p, "c3c7");
    const auto kinds = {DomainFactorKind::CaptureNextMove, DomainFactorKind::CheckNextMove, DomainFactorKind::MateSoon};

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
        for (const auto& f : r.factors) got.push_back(f.name);
        INFO("trial " << trial);
        CHECK(got == oracle::brute_force_top_k(all, cfg.k));

        // Domain factors precede utility ones; plain RGA never carries domain factors.
        bool seen_utility = false;
        for (const auto& f : r.factors) {
            if (f.source == FactorSource::Utility) seen_utility = true;
            else CHECK_FALSE(seen_utility);
            if (!plus) CHECK(f.source == FactorSource::Utility);
        }
        if (plus && !d.empty()) CHECK(r.factors.front().source == FactorSource::Domain);

        // Each line uses the template of its factor's sign.
        REQUIRE(r.lines.size() == r.factors.size());
        for (std::size_t i = 0; i < r.lines.size(); ++i)
            CHECK(r.lines[i] == TemplateRegistry::builtin().render(r.factors[i].name, r.factors[i].positive, r.move_san,
                                                                   r.factors[i].mate_in, r.factors[i].piece));

        // Positive rescaling of every z leaves the selection unchanged.
        CalibrationTable scaled = t;
        for (auto& [name, s] : scaled.factors) s.sd /= 3.7;
        for (auto& [name, s] : scaled.factors) s.mean = 0;
        CalibrationTable unscaled = t;
        for (auto& [name, s] : unscaled.factors) s.mean = 0;
        const auto r1 = generate_rationale(fv, a, plus ? std::optional(d) : std::nullopt, cfg, unscaled, p);
        const auto r2 = generate_rationale(fv, a, plus ? std::optional(d) : std::nullopt, cfg, scaled, p);
        REQUIRE(r1.factors.size() == r2.factors.size());
        for (std::size_t i = 0; i < r1.factors.size(); ++i) CHECK(r1.factors[i].name == r2.factors[i].name);
    }
}

TEST_CASE("detect_non_optimal") {
    SECTION("threshold arithmetic") {
        std::vector<ScoredMove> nine;
        for (int i = 0; i < 9; ++i) nine.push_back({Move{i, i + 8}, i * 10, std::nullopt, 0});
        assign_mid_ranks(nine);
        const auto t = detect_non_optimal(nine, Move{1, 9}, RGAConfig{});
        REQUIRE(t);
        CHECK(t->percentile == 12.5);
        CHECK_FALSE(detect_non_optimal(nine, Move{8, 16}, RGAConfig{}));
        std::vector<ScoredMove> one{{Move{0, 8}, 0, std::nullopt, 1.0}};
        CHECK_FALSE(detect_non_optimal(one, Move{0, 8}, RGAConfig{}));
        CHECK_THROWS_AS(detect_non_optimal(nine, Move{60, 61}, RGAConfig{}), MetricError);
    }
    SECTION("agrees with an independent percentile over seeded positions") {
        const RGAConfig cfg;
        int fired = 0, quiet = 0;
        for (std::uint64_t i = 0; i < 50; ++i) {
            const Position p = random_position({4, 10}, derive_seed(31337, i));
            const auto ranking = rank_moves(p, 2);
            for (const auto& s : ranking) {
                const bool expect = oracle::percentile(ranking, s.move) < 100.0 / 3.0;
                const bool got = detect_non_optimal(ranking, s.move, cfg).has_value();
                CHECK(got == expect);
                (got ? fired : quiet) += 1;
            }
        }
        CHECK(fired > 0);
        CHECK(quiet > 0);
    }
}

TEST_CASE("generate_cautionary") {
    SECTION("hanging the queen") {
        // Qd1-d5 puts the queen en prise to the e6 pawn.
        const Position p = parse_fen("4k3/8/4p3/8/8/8/8/3QK3 w - - 0 1");
        const Move m = parse_uci_move(p, "d1d5");
        const auto r = generate_cautionary(p, m, RGAConfig{}, real_table());
        CHECK(r.polarity == Polarity::Cautionary);
        CHECK(r.move_san == "Qd5");
        bool hanging = false;
        for (const auto& f : r.factors) {
            CHECK_FALSE(f.positive);
            hanging = hanging || f.name == "HangingPiece";
        }
        CHECK(hanging);
        CHECK(std::find(r.lines.begin(), r.lines.end(), "Qd5 leaves a piece undefended where it can be captured.") !=
              r.lines.end());

        // Oracle: the two most negative z-scores of the post-move position.
        std::vector<oracle::Candidate> neg;
        for (const auto& z : zscore(compute_factors(apply_move(p, m)), real_table()))
            if (z.z < 0) neg.push_back({z.name, false, 0, -z.z});
        std::vector<std::string> got;
        for (const auto& f : r.factors) got.push_back(f.name);
        CHECK(got == oracle::brute_force_top_k(neg, 2));
    }
    SECTION("allowing a back-rank mate") {
        const Position p = parse_fen("r5k1/5ppp/8/8/8/8/5PPP/3R2K1 w - - 0 1");
        const Move m = parse_uci_move(p, "d1d3");
        const auto after = apply_move(p, m);
        const auto expected = oracle::mate_distance(to_fen(after), 3);
        REQUIRE(expected == 2);

        CautionOptions opt;
        opt.use_domain = true;
        const auto plus = generate_cautionary(p, m, RGAConfig{}, real_table(), opt);
        REQUIRE_FALSE(plus.factors.empty());
        CHECK(plus.factors[0].name == "MateSoon");
        CHECK_FALSE(plus.factors[0].positive);
        CHECK(plus.lines[0] == "Rd3 allows your opponent to force checkmate in 2 move(s).");
        CHECK(plus.variant == Variant::RGAPlus);

        const auto plain = generate_cautionary(p, m, RGAConfig{}, real_table());
        for (const auto& f : plain.factors) CHECK(f.source == FactorSource::Utility);
        CHECK(generate_cautionary(p, m, RGAConfig{}, real_table(), opt) == plus);
    }
    SECTION("fallback line when nothing works against the mover") {
        const Position p = parse_fen("4k3/8/4p3/8/8/8/8/3QK3 w - - 0 1");
        CalibrationTable t = unit_table();
        for (auto& [name, s] : t.factors) s.mean = -1e9;  // every factor looks good
        const auto r = generate_cautionary(p, parse_uci_move(p, "d1d5"), RGAConfig{}, t);
        CHECK(r.factors.empty());
        REQUIRE(r.lines.size() == 1);
        CHECK(r.lines[0] == "Qd5 is among the weakest moves available here.");
    }
}
