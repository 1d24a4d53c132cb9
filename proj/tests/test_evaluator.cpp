// Scoring pinned against independent oracles: a naive per-record confusion
// sweep for record mode, an O(P*N) pairwise rank statistic for AUC, and
// hand-worked interval overlaps for attack mode.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "icsad/errors.hpp"
#include "icsad/evaluator.hpp"

using namespace icsad;
using namespace icsad::eval;

namespace {

det::AnomalyInterval iv(std::size_t s, std::size_t e, double peak = 3.0,
                        std::string feat = "f0") {
    det::AnomalyInterval a;
    a.start_index = s;
    a.end_index = e;
    a.peak_zscore = peak;
    a.triggering_feature = std::move(feat);
    return a;
}

data::AttackLabel attack(int id, std::int64_t s, std::int64_t e, bool effective = true) {
    data::AttackLabel a;
    a.attack_id = id;
    a.start = s;
    a.end = e;
    a.expected_impact_achieved = effective;
    return a;
}

std::vector<std::int64_t> clock_of(std::size_t n) {
    std::vector<std::int64_t> t(n);
    std::iota(t.begin(), t.end(), 0);
    return t;
}

// Random disjoint sorted intervals inside [0, n).
std::vector<det::AnomalyInterval> random_intervals(std::mt19937_64& rng, std::size_t n) {
    std::vector<det::AnomalyInterval> out;
    std::uniform_int_distribution<std::size_t> gap(0, n / 4), len(1, n / 6 + 1);
    std::size_t pos = gap(rng);
    while (pos < n) {
        std::size_t end = std::min(n, pos + len(rng));
        out.push_back(iv(pos, end));
        pos = end + 1 + gap(rng);
    }
    return out;
}

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0;
};

Confusion naive_confusion(const std::vector<det::AnomalyInterval>& dets,
                          const std::vector<std::uint8_t>& labels) {
    std::vector<std::uint8_t> flag(labels.size(), 0);
    for (const auto& d : dets)
        for (std::size_t i = d.start_index; i < d.end_index; ++i) flag[i] = 1;
    Confusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (flag[i] && labels[i]) ++c.tp;
        if (flag[i] && !labels[i]) ++c.fp;
        if (!flag[i] && labels[i]) ++c.fn;
    }
    return c;
}

double pairwise_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            total += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("f1 is the harmonic mean with a zero guard") {
    CHECK(std::abs(f1(1.0, 0.8529) - 0.9206) < 1e-4);
    for (double p : {0.1, 0.5, 0.9, 1.0}) CHECK(f1(p, p) == doctest::Approx(p));
    CHECK(f1(0.0, 0.0) == 0.0);
    CHECK(f1(0.0, 0.7) == 0.0);
    CHECK(f1(0.7, 0.0) == 0.0);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        double p = u(rng), r = u(rng);
        CHECK(f1(p, r) == doctest::Approx(f1(r, p)));
        CHECK(f1(p, r) <= 2.0 * std::min(p, r) + 1e-12);
    }
}

TEST_CASE("attack_based_score: overlap against the extended window") {
    auto clock = clock_of(1000);

    SUBCASE("detection overlapping the attack is a true positive") {
        auto m = attack_based_score({iv(100, 150)}, {attack(1, 120, 200)}, clock, 60.0);
        CHECK(m.true_positives == 1);
        CHECK(m.false_negatives == 0);
        CHECK(m.false_positives == 0);
        CHECK(m.detecting_intervals == 1);
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
        CHECK(m.mode == ScoreMode::attack_based);
        CHECK_FALSE(m.degenerate_precision);
    }
    SUBCASE("the extension rescues a detection just after the attack") {
        // attack [100, 200), detection starting at 230: only reached via extension
        auto near = attack_based_score({iv(230, 240)}, {attack(1, 100, 200)}, clock, 60.0);
        CHECK(near.true_positives == 1);
        auto strict = attack_based_score({iv(230, 240)}, {attack(1, 100, 200)}, clock, 0.0);
        CHECK(strict.true_positives == 0);
        CHECK(strict.false_positives == 1);
    }
    SUBCASE("a detection far from every extended attack is one false positive") {
        auto m = attack_based_score({iv(900, 950)}, {attack(1, 700, 740)}, clock, 60.0);
        CHECK(m.true_positives == 0);
        CHECK(m.false_negatives == 1);
        CHECK(m.false_positives == 1);
        CHECK(m.precision == 0.0);
        CHECK(m.recall == 0.0);
        CHECK_FALSE(m.degenerate_precision);  // something was flagged, it was just wrong
    }
    SUBCASE("no detections at all is the degenerate precision case") {
        auto m = attack_based_score({}, {attack(1, 100, 200)}, clock, 60.0);
        CHECK(m.precision == 0.0);
        CHECK(m.recall == 0.0);
        CHECK(m.degenerate_precision);
    }
    SUBCASE("bad configuration") {
        CHECK_THROWS_AS(attack_based_score({iv(0, 1)}, {}, clock, 60.0), ConfigError);
        CHECK_THROWS_AS(attack_based_score({iv(0, 1)}, {attack(1, 5, 9)}, clock, -1.0),
                        ConfigError);
        CHECK_THROWS_AS(attack_based_score({iv(990, 1200)}, {attack(1, 5, 9)}, clock, 0.0),
                        DimensionError);
    }
}

TEST_CASE("attack_based_score reproduces the headline fixture arithmetic") {
    // 34 effective attacks, each 200 s long, spaced 1000 s apart; 29 caught
    // cleanly with one in-attack interval each, 5 missed, no false alarms.
    std::vector<data::AttackLabel> attacks;
    std::vector<det::AnomalyInterval> dets;
    const std::vector<int> missed{3, 12, 13, 28, 33};
    for (int i = 0; i < 34; ++i) {
        attacks.push_back(attack(i + 1, 1000 * i, 1000 * i + 200));
        if (std::find(missed.begin(), missed.end(), i) == missed.end())
            dets.push_back(iv(1000 * static_cast<std::size_t>(i) + 50,
                              1000 * static_cast<std::size_t>(i) + 120));
    }
    auto m = attack_based_score(dets, attacks, clock_of(34000), 300.0);
    CHECK(m.true_positives == 29);
    CHECK(m.false_negatives == 5);
    CHECK(m.false_positives == 0);
    CHECK(m.precision == 1.0);
    CHECK(std::abs(m.recall - 0.8529) < 1e-4);
    CHECK(std::abs(m.f1 - 0.9206) < 1e-4);
}

TEST_CASE("attack_based_score: 36 attacks with 4 misses and clean alarms") {
    std::vector<data::AttackLabel> attacks;
    std::vector<det::AnomalyInterval> dets;
    const std::vector<int> missed_ids{4, 13, 14, 29};
    for (int i = 0; i < 36; ++i) {
        attacks.push_back(attack(i + 1, 1000 * i, 1000 * i + 200));
        if (std::find(missed_ids.begin(), missed_ids.end(), i + 1) == missed_ids.end())
            dets.push_back(iv(1000 * static_cast<std::size_t>(i) + 10,
                              1000 * static_cast<std::size_t>(i) + 40));
    }
    auto m = attack_based_score(dets, attacks, clock_of(36000), 300.0);
    CHECK(m.true_positives == 32);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == doctest::Approx(32.0 / 36.0));
    CHECK(m.f1 == doctest::Approx(f1(1.0, 32.0 / 36.0)));
}

TEST_CASE("attack_based_score: recall is monotone in the extension") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2000;
        auto clock = clock_of(n);
        std::vector<data::AttackLabel> attacks;
        std::uniform_int_distribution<std::int64_t> at(0, 1700);
        for (int a = 0; a < 5; ++a) {
            std::int64_t s = at(rng);
            attacks.push_back(attack(a + 1, s, s + 40));
        }
        auto dets = random_intervals(rng, n);
        if (dets.empty()) continue;

        double prev = -1.0;
        for (double ext : {0.0, 50.0, 500.0, 1e9}) {
            auto m = attack_based_score(dets, attacks, clock, ext);
            CHECK(m.recall >= prev);
            CHECK(m.true_positives + m.false_negatives == attacks.size());
            prev = m.recall;
        }
    }
}

TEST_CASE("attack_based_score can excuse attacks that never took effect") {
    auto clock = clock_of(1200);
    std::vector<data::AttackLabel> attacks{attack(1, 100, 200),
                                           attack(2, 500, 600, /*effective=*/false)};
    std::vector<det::AnomalyInterval> dets{iv(110, 130), iv(520, 540), iv(900, 950)};

    auto all = attack_based_score(dets, attacks, clock, 50.0, /*include_ineffective=*/true);
    CHECK(all.true_positives == 2);
    CHECK(all.false_positives == 1);
    CHECK(all.detecting_intervals == 2);
    CHECK(all.precision == doctest::Approx(2.0 / 3.0));
    CHECK(all.recall == 1.0);

    auto strict = attack_based_score(dets, attacks, clock, 50.0, /*include_ineffective=*/false);
    CHECK(strict.true_positives == 1);
    CHECK(strict.false_negatives == 0);
    // the interval inside the excused attack is neither a hit nor a false alarm
    CHECK(strict.detecting_intervals == 1);
    CHECK(strict.false_positives == 1);
    CHECK(strict.precision == doctest::Approx(0.5));
    CHECK(strict.recall == 1.0);
}

TEST_CASE("per_attack_outcomes reports flags and first-detection latency") {
    auto clock = clock_of(1000);
    std::vector<data::AttackLabel> attacks{attack(1, 100, 200), attack(2, 300, 400),
                                           attack(3, 600, 700)};
    std::vector<det::AnomalyInterval> dets{iv(130, 140), iv(260, 320), iv(350, 360)};

    auto rows = per_attack_outcomes(dets, attacks, clock, 50.0);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].attack_id == 1);
    CHECK(rows[0].detected);
    CHECK(rows[0].latency_seconds == 30.0);
    CHECK(rows[1].attack_id == 2);
    CHECK(rows[1].detected);
    CHECK(rows[1].latency_seconds == 0.0);  // detection backdated before the attack
    CHECK(rows[2].attack_id == 3);
    CHECK_FALSE(rows[2].detected);
}

TEST_CASE("record_based_score matches a naive confusion sweep") {
    SUBCASE("perfect flags") {
        std::vector<std::uint8_t> labels(100, 0);
        for (std::size_t i = 40; i < 60; ++i) labels[i] = 1;
        auto m = record_based_score({iv(40, 60)}, labels);
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
        CHECK(m.true_positives == 20);
        CHECK(m.mode == ScoreMode::record_based);
    }
    SUBCASE("an all-normal prediction has degenerate precision") {
        std::vector<std::uint8_t> labels{0, 1, 1, 0, 1};
        auto m = record_based_score({}, labels);
        CHECK(m.recall == 0.0);
        CHECK(m.precision == 0.0);
        CHECK(m.f1 == 0.0);
        CHECK(m.degenerate_precision);
        CHECK(m.false_negatives == 3);
    }
    SUBCASE("random instances agree with the oracle") {
        std::mt19937_64 rng(29);
        std::bernoulli_distribution lab(0.3);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 1 + static_cast<std::size_t>(rng() % 300);
            std::vector<std::uint8_t> labels(n);
            for (auto& v : labels) v = lab(rng) ? 1 : 0;
            auto dets = random_intervals(rng, n);

            auto m = record_based_score(dets, labels);
            auto c = naive_confusion(dets, labels);
            CHECK(m.true_positives == c.tp);
            CHECK(m.false_positives == c.fp);
            CHECK(m.false_negatives == c.fn);

            std::size_t positives = 0, flagged = 0;
            for (auto v : labels) positives += v;
            for (const auto& d : dets) flagged += d.end_index - d.start_index;
            CHECK(m.true_positives + m.false_negatives == positives);
            CHECK(m.true_positives + m.false_positives == flagged);
            CHECK(m.f1 == doctest::Approx(f1(m.precision, m.recall)));
        }
    }
    SUBCASE("detections must stay inside the labeled range") {
        std::vector<std::uint8_t> labels(10, 0);
        CHECK_THROWS_AS(record_based_score({iv(8, 12)}, labels), DimensionError);
    }
}

TEST_CASE("roc_auc: trapezoid equals the pairwise rank statistic") {
    SUBCASE("separable scores give AUC 1") {
        auto r = roc_auc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0});
        CHECK(r.auc == 1.0);
        REQUIRE(r.points.size() >= 2);
        CHECK(r.points.front().fpr == 0.0);
        CHECK(r.points.front().tpr == 0.0);
        CHECK(r.points.back().fpr == 1.0);
        CHECK(r.points.back().tpr == 1.0);
    }
    SUBCASE("random instances with ties match the O(P*N) oracle") {
        std::mt19937_64 rng(41);
        for (int trial = 0; trial < 300; ++trial) {
            const std::size_t n = 2 + rng() % 199;
            std::vector<double> s(n);
            std::vector<std::uint8_t> y(n);
            for (auto& v : s) v = static_cast<double>(rng() % 9) / 4.0;  // coarse -> ties
            for (auto& v : y) v = rng() % 2;
            y[0] = 1;
            y[n - 1] = 0;  // guarantee both classes
            auto r = roc_auc(s, y);
            CHECK(std::abs(r.auc - pairwise_auc(s, y)) <= 1e-9);
            for (std::size_t i = 1; i < r.points.size(); ++i) {
                CHECK(r.points[i].fpr >= r.points[i - 1].fpr);
                CHECK(r.points[i].tpr >= r.points[i - 1].tpr);
            }
        }
    }
    SUBCASE("labels independent of scores sit near one half") {
        std::mt19937_64 rng(43);
        const std::size_t n = 4000;
        std::vector<double> s(n);
        std::vector<std::uint8_t> y(n);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = u(rng);
            y[i] = u(rng) < 0.4 ? 1 : 0;
        }
        y[0] = 1;
        y[1] = 0;
        CHECK(std::abs(roc_auc(s, y).auc - 0.5) < 0.05);
    }
    SUBCASE("one-class label vectors are rejected") {
        CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {1, 1}), DataError);
        CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {0, 0}), DataError);
        CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {1, 0, 1}), DimensionError);
    }
}

TEST_CASE("ensemble_union merges overlapping and adjacent stage detections") {
    SUBCASE("single stage passes through") {
        std::vector<det::AnomalyInterval> one{iv(3, 9, 2.5, "level"), iv(20, 22, 4.0, "flow")};
        auto u = ensemble_union({one});
        REQUIRE(u.size() == 2);
        CHECK(u[0].start_index == 3);
        CHECK(u[0].peak_zscore == 2.5);
        CHECK(u[1].triggering_feature == "flow");
    }
    SUBCASE("overlap across stages merges") {
        auto u = ensemble_union({{iv(0, 10, 2.1)}, {iv(5, 20, 3.3, "p2")}});
        REQUIRE(u.size() == 1);
        CHECK(u[0].start_index == 0);
        CHECK(u[0].end_index == 20);
        CHECK(u[0].peak_zscore == 3.3);
        CHECK(u[0].triggering_feature == "p2");
    }
    SUBCASE("adjacent intervals merge, separated ones do not") {
        auto u = ensemble_union({{iv(0, 5)}, {iv(5, 9)}, {iv(11, 12)}});
        REQUIRE(u.size() == 2);
        CHECK(u[0].start_index == 0);
        CHECK(u[0].end_index == 9);
        CHECK(u[1].start_index == 11);
    }
    SUBCASE("disjoint stage outputs come back sorted with count preserved") {
        auto u = ensemble_union({{iv(40, 42)}, {iv(0, 2)}, {iv(10, 12)}});
        REQUIRE(u.size() == 3);
        CHECK(u[0].start_index == 0);
        CHECK(u[1].start_index == 10);
        CHECK(u[2].start_index == 40);
    }
    SUBCASE("union recall never drops below the best single stage") {
        std::mt19937_64 rng(53);
        auto clock = clock_of(800);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<data::AttackLabel> attacks;
            std::uniform_int_distribution<std::int64_t> at(0, 700);
            for (int a = 0; a < 4; ++a) {
                std::int64_t s = at(rng);
                attacks.push_back(attack(a + 1, s, s + 30));
            }
            std::vector<std::vector<det::AnomalyInterval>> stages;
            double best = 0.0;
            for (int s = 0; s < 3; ++s) {
                stages.push_back(random_intervals(rng, 800));
                best = std::max(
                    best, attack_based_score(stages.back(), attacks, clock, 60.0).recall);
            }
            auto u = ensemble_union(stages);
            if (u.empty()) continue;
            CHECK(attack_based_score(u, attacks, clock, 60.0).recall >= best);
        }
    }
}

TEST_CASE("grid_search scans T x W and breaks F1 ties upward") {
    // Score trace: flat zero except a strong plateau inside the lone attack.
    const std::size_t n = 400;
    auto clock = clock_of(n);
    std::vector<data::AttackLabel> attacks{attack(1, 100, 130)};

    Tensor z({n, 1});
    for (std::size_t t = 0; t < n; ++t) z.at(t, 0) = (t >= 100 && t < 130) ? 5.0 : 0.0;
    RunScores run;
    run.zscores = z;
    run.sample_to_record.resize(n);
    std::iota(run.sample_to_record.begin(), run.sample_to_record.end(), 0);

    SUBCASE("single cell result is that cell") {
        GridSpec g;
        g.thresholds = {2.0};
        g.windows = {5};
        auto r = grid_search({run}, attacks, clock, 60.0, g);
        CHECK(r.cells.size() == 1);
        CHECK(r.best_cell == 0);
        CHECK(r.chosen().threshold == 2.0);
        CHECK(r.chosen().window == 5);
        CHECK(r.chosen().metrics.f1 == 1.0);
        CHECK(r.runs_averaged == 1);
    }
    SUBCASE("equal F1 picks the larger threshold, then the larger window") {
        GridSpec g;
        g.thresholds = {2.0, 2.5};
        g.windows = {3};
        auto r = grid_search({run}, attacks, clock, 60.0, g);
        CHECK(r.chosen().threshold == 2.5);

        g.thresholds = {2.0};
        g.windows = {3, 5};
        auto r2 = grid_search({run}, attacks, clock, 60.0, g);
        CHECK(r2.chosen().window == 5);
    }
    SUBCASE("defaults cover the published ranges") {
        GridSpec g;
        CHECK(g.thresholds == std::vector<double>{1.8, 2.0, 2.2, 2.4, 2.6, 2.8, 3.0});
        CHECK(g.windows == std::vector<std::size_t>{50, 100, 150, 200, 250, 300});
    }
    SUBCASE("multiple runs average their F1") {
        Tensor z2({n, 1});  // fires only outside the attack: pure false alarm
        for (std::size_t t = 0; t < n; ++t) z2.at(t, 0) = (t >= 300 && t < 310) ? 5.0 : 0.0;
        RunScores run2 = run;
        run2.zscores = z2;

        GridSpec g;
        g.thresholds = {2.0};
        g.windows = {3};
        auto r = grid_search({run, run2}, attacks, clock, 60.0, g);
        CHECK(r.runs_averaged == 2);
        CHECK(r.chosen().metrics.f1 == doctest::Approx(0.5));  // (1.0 + 0.0) / 2
        CHECK(r.chosen().metrics.true_positives == 1);         // counts are summed
        CHECK(r.chosen().metrics.false_positives == 1);
    }
    SUBCASE("thread fan-out changes nothing") {
        std::mt19937_64 rng(67);
        Tensor zr({n, 2});
        for (auto& v : zr.vec()) v = 3.0 * std::uniform_real_distribution<double>(0, 1)(rng);
        RunScores rrun;
        rrun.zscores = zr;
        rrun.sample_to_record = run.sample_to_record;

        GridSpec g;
        g.thresholds = {1.8, 2.2, 2.6};
        g.windows = {2, 4, 8};
        auto a = grid_search({rrun}, attacks, clock, 60.0, g, 1);
        auto b = grid_search({rrun}, attacks, clock, 60.0, g, 4);
        REQUIRE(a.cells.size() == b.cells.size());
        CHECK(a.best_cell == b.best_cell);
        for (std::size_t i = 0; i < a.cells.size(); ++i) {
            CHECK(a.cells[i].metrics.f1 == b.cells[i].metrics.f1);
            CHECK(a.cells[i].metrics.true_positives == b.cells[i].metrics.true_positives);
            CHECK(a.cells[i].metrics.false_positives == b.cells[i].metrics.false_positives);
        }
    }
    SUBCASE("bad configurations are rejected up front") {
        GridSpec g;
        CHECK_THROWS_AS(grid_search({}, attacks, clock, 60.0, g), ConfigError);

        g.windows = {1000};  // longer than the trace
        CHECK_THROWS_AS(grid_search({run}, attacks, clock, 60.0, g), ConfigError);

        g = GridSpec{};
        g.thresholds.clear();
        CHECK_THROWS_AS(grid_search({run}, attacks, clock, 60.0, g), ConfigError);
    }
}
