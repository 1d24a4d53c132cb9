// Simulator checks: tick-level mass balance against the emitted flow traces,
// controller transitions re-derived from the plant's own reported values,
// spoof/forcing semantics via paired simulations, and the benchmark suite
// contract (sizes, labels, determinism, no-op attacks).

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "icsad/errors.hpp"
#include "icsad/plant.hpp"

using namespace icsad;
using plant::AttackKind;
using plant::AttackScenario;
using plant::PlantConfig;

namespace {

AttackScenario scen(int id, std::int64_t start, std::int64_t end, AttackKind kind, double value,
                    std::string target) {
    AttackScenario a;
    a.attack_id = id;
    a.start = start;
    a.end = end;
    a.kind = kind;
    a.value = value;
    a.target = std::move(target);
    return a;
}

std::size_t feature_index(const data::RawDataset& d, const std::string& name) {
    for (std::size_t f = 0; f < d.feature_names.size(); ++f)
        if (d.feature_names[f] == name) return f;
    REQUIRE(false);
    return 0;
}

struct TempFile {
    std::string path;
    explicit TempFile(const char* name) : path(std::string("./") + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("plant configuration and scenario validation") {
    PlantConfig cfg = PlantConfig::standard();

    SUBCASE("setpoint ordering") {
        cfg.stages[1].high = cfg.stages[1].capacity + 1.0;
        CHECK_THROWS_AS(plant::simulate(cfg, 10, {}), ConfigError);
        cfg = PlantConfig::standard();
        cfg.stages[0].low = 0.0;
        CHECK_THROWS_AS(plant::simulate(cfg, 10, {}), ConfigError);
        cfg = PlantConfig::standard();
        cfg.stages[2].out_rate = 0.0;
        CHECK_THROWS_AS(plant::simulate(cfg, 10, {}), ConfigError);
        cfg = PlantConfig::standard();
        cfg.stages.clear();
        CHECK_THROWS_AS(plant::simulate(cfg, 10, {}), ConfigError);
    }
    SUBCASE("duration and noise") {
        CHECK_THROWS_AS(plant::simulate(cfg, 0, {}), ConfigError);
        cfg.noise_std_frac = -0.1;
        CHECK_THROWS_AS(plant::simulate(cfg, 10, {}), ConfigError);
    }
    SUBCASE("scenario shape") {
        cfg.warmup_seconds = 100;
        auto bad_empty = scen(1, 200, 200, AttackKind::stuck_sensor, 1.0, "LIT101");
        CHECK_THROWS_AS(plant::simulate(cfg, 400, {bad_empty}), ConfigError);

        auto in_warmup = scen(1, 50, 150, AttackKind::stuck_sensor, 1.0, "LIT101");
        CHECK_THROWS_AS(plant::simulate(cfg, 400, {in_warmup}), ConfigError);

        auto unknown = scen(1, 200, 300, AttackKind::stuck_sensor, 1.0, "LIT901");
        CHECK_THROWS_AS(plant::simulate(cfg, 400, {unknown}), ConfigError);

        auto spoof_actuator = scen(1, 200, 300, AttackKind::stuck_sensor, 1.0, "MV101");
        CHECK_THROWS_AS(plant::simulate(cfg, 400, {spoof_actuator}), ConfigError);

        auto force_sensor = scen(1, 200, 300, AttackKind::force_actuator, 1.0, "LIT101");
        CHECK_THROWS_AS(plant::simulate(cfg, 400, {force_sensor}), ConfigError);
    }
    SUBCASE("overlap rules") {
        cfg.warmup_seconds = 0;
        auto a = scen(1, 100, 200, AttackKind::stuck_sensor, 500.0, "LIT101");
        auto b = scen(2, 150, 250, AttackKind::ramp_sensor, 1.0, "LIT101");
        CHECK_THROWS_AS(plant::simulate(cfg, 400, {a, b}), ConfigError);
        // same window on different targets is allowed
        auto c = scen(2, 150, 250, AttackKind::ramp_sensor, 1.0, "LIT201");
        CHECK_NOTHROW(plant::simulate(cfg, 400, {a, c}));
    }
}

TEST_CASE("per-tick mass balance holds against the emitted flow traces") {
    PlantConfig cfg = PlantConfig::standard();
    cfg.warmup_seconds = 0;
    auto sim = plant::simulate(cfg, 4000, {});
    const std::size_t S = cfg.stages.size();

    for (std::size_t t = 1; t < 4000; ++t) {
        for (std::size_t s = 0; s < S; ++s) {
            const double lvl = sim.true_levels.at(t, s);
            if (lvl == 0.0 || lvl == cfg.stages[s].capacity) continue;  // clamped
            const double delta = lvl - sim.true_levels.at(t - 1, s);
            const double net = sim.true_flows.at(t, s) - sim.true_flows.at(t, s + 1);
            CHECK(std::abs(delta - net) < 1e-9);
        }
    }
    CHECK(sim.events.empty());  // normal operation never clamps
}

TEST_CASE("controller logic is reproducible from the reported data alone") {
    PlantConfig cfg = PlantConfig::standard();
    cfg.warmup_seconds = 0;
    auto sim = plant::simulate(cfg, 5000, {});
    const auto& v = sim.data.values;

    for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
        const std::size_t lit = 4 * s, mv = 4 * s + 2, p = 4 * s + 3;
        std::size_t valve_toggles = 0;
        for (std::size_t t = 1; t < 5000; ++t) {
            const double prev_level = v.at(t - 1, lit);
            double expect_valve = v.at(t - 1, mv);
            if (prev_level < cfg.stages[s].low) expect_valve = 1.0;
            if (prev_level > cfg.stages[s].high) expect_valve = 0.0;
            CHECK(v.at(t, mv) == expect_valve);
            CHECK(v.at(t, p) == (prev_level > cfg.stages[s].low ? 1.0 : 0.0));
            valve_toggles += v.at(t, mv) != v.at(t - 1, mv) ? 1 : 0;
        }
        CHECK(valve_toggles >= 4);  // the stage actually cycles
    }
}

TEST_CASE("filling continues until the high setpoint closes the valve") {
    PlantConfig cfg = PlantConfig::standard();
    cfg.warmup_seconds = 0;
    cfg.noise_std_frac = 0.0;  // exact thresholds for the trajectory walk
    auto sim = plant::simulate(cfg, 3000, {});
    const auto& v = sim.data.values;

    bool saw_fill_then_close = false;
    for (std::size_t t = 1; t < 3000; ++t) {
        const bool open = v.at(t, 2) > 0.5;
        if (open) {
            // inflow exceeds the transfer rate, so an open valve always fills
            CHECK(sim.true_levels.at(t, 0) > sim.true_levels.at(t - 1, 0));
            CHECK(sim.true_levels.at(t, 0) <= cfg.stages[0].capacity);
        }
        if (t > 1 && !open && v.at(t - 1, 2) > 0.5) {
            CHECK(v.at(t - 1, 0) > cfg.stages[0].high);
            saw_fill_then_close = true;
        }
    }
    CHECK(saw_fill_then_close);
}

TEST_CASE("same seed reproduces the dataset bit for bit") {
    PlantConfig cfg = PlantConfig::standard();
    cfg.warmup_seconds = 0;
    auto scenarios = std::vector<AttackScenario>{
        scen(1, 500, 900, AttackKind::stuck_sensor, 700.0, "LIT101")};
    auto a = plant::simulate(cfg, 1500, scenarios);
    auto b = plant::simulate(cfg, 1500, scenarios);
    CHECK(a.data.values.vec() == b.data.values.vec());
    CHECK(a.data.timestamps == b.data.timestamps);
    CHECK(a.data.labels == b.data.labels);
    CHECK(a.events == b.events);
    CHECK(a.true_levels.vec() == b.true_levels.vec());

    cfg.seed = 2;
    auto c = plant::simulate(cfg, 1500, scenarios);
    CHECK(c.data.values.vec() != a.data.values.vec());
}

TEST_CASE("a level frozen in-band with the valve forced open overflows the tank") {
    PlantConfig cfg = PlantConfig::standard();
    cfg.warmup_seconds = 0;
    const double frozen = 0.7 * cfg.stages[0].capacity;
    std::vector<AttackScenario> attack{
        scen(1, 600, 1320, AttackKind::stuck_sensor, frozen, "LIT101"),
        scen(2, 600, 1320, AttackKind::force_actuator, 1.0, "MV101"),
    };
    auto sim = plant::simulate(cfg, 2000, attack);

    double peak = 0.0;
    for (std::size_t t = 600; t < 1320; ++t) peak = std::max(peak, sim.true_levels.at(t, 0));
    CHECK(peak > cfg.stages[0].high);
    CHECK(peak == cfg.stages[0].capacity);  // clamped at the brim

    bool overflow_logged = false;
    for (const auto& e : sim.events)
        overflow_logged = overflow_logged || e.find("stage 1 overflow") != std::string::npos;
    CHECK(overflow_logged);

    // the spoofed reading is exact and constant for the whole window
    for (std::size_t t = 600; t < 1320; ++t) CHECK(sim.data.values.at(t, 0) == frozen);
    CHECK(sim.data.values.at(1320, 0) != frozen);
}

TEST_CASE("spoof arithmetic via paired runs on a flow sensor the controller ignores") {
    PlantConfig cfg = PlantConfig::standard();
    cfg.warmup_seconds = 0;
    auto base = plant::simulate(cfg, 1200, {});

    SUBCASE("ramp adds value*(t - start + 1)") {
        auto ramp = scen(1, 400, 700, AttackKind::ramp_sensor, 0.25, "FIT201");
        auto sim = plant::simulate(cfg, 1200, {ramp});
        const std::size_t f = feature_index(sim.data, "FIT201");
        for (std::size_t t = 0; t < 1200; ++t) {
            const double diff = sim.data.values.at(t, f) - base.data.values.at(t, f);
            if (t >= 400 && t < 700)
                CHECK(diff == doctest::Approx(0.25 * (static_cast<double>(t) - 400 + 1))
                                  .epsilon(1e-12));
            else
                CHECK(diff == 0.0);
        }
        // physics is untouched: the controller never reads flow sensors
        CHECK(sim.true_levels.vec() == base.true_levels.vec());
    }
    SUBCASE("stuck pins the reading exactly") {
        auto stuck = scen(1, 400, 700, AttackKind::stuck_sensor, 9.5, "FIT101");
        auto sim = plant::simulate(cfg, 1200, {stuck});
        const std::size_t f = feature_index(sim.data, "FIT101");
        for (std::size_t t = 400; t < 700; ++t) CHECK(sim.data.values.at(t, f) == 9.5);
        CHECK(sim.true_levels.vec() == base.true_levels.vec());
    }
}

TEST_CASE("labels cover scenario intervals half-open with exact edges") {
    PlantConfig cfg = PlantConfig::standard();
    cfg.warmup_seconds = 0;
    std::vector<AttackScenario> ss{
        scen(7, 300, 420, AttackKind::stuck_sensor, 2.0, "FIT301"),
        scen(9, 800, 801, AttackKind::ramp_sensor, 0.5, "FIT401"),
    };
    auto sim = plant::simulate(cfg, 1000, ss);
    for (std::size_t t = 0; t < 1000; ++t) {
        const bool expected = (t >= 300 && t < 420) || t == 800;
        CHECK(sim.data.labels[t] == (expected ? 1 : 0));
    }
    REQUIRE(sim.attacks.size() == 2);
    CHECK(sim.attacks[0].attack_id == 7);
    CHECK(sim.attacks[0].start == 300);
    CHECK(sim.attacks[0].end == 420);
    CHECK(sim.attacks[0].stage_tags == std::vector<std::string>{"P3"});
    CHECK(sim.data.attack_table.size() == 2);
}

TEST_CASE("scenario files round-trip and the checked-in suite matches the built-in one") {
    auto suite = plant::benchmark_scenarios();

    TempFile tmp("scenario_roundtrip.json");
    plant::save_scenarios(tmp.path, suite);
    auto loaded = plant::load_scenarios(tmp.path);
    REQUIRE(loaded.size() == suite.size());
    for (std::size_t i = 0; i < suite.size(); ++i) {
        CHECK(loaded[i].attack_id == suite[i].attack_id);
        CHECK(loaded[i].start == suite[i].start);
        CHECK(loaded[i].end == suite[i].end);
        CHECK(loaded[i].kind == suite[i].kind);
        CHECK(loaded[i].value == suite[i].value);
        CHECK(loaded[i].target == suite[i].target);
        CHECK(loaded[i].expected_impact_achieved == suite[i].expected_impact_achieved);
        CHECK(loaded[i].description == suite[i].description);
    }

    auto checked_in = plant::load_scenarios(std::string(ICSAD_REPO_ROOT) +
                                            "/data/benchmark_attacks.json");
    REQUIRE(checked_in.size() == suite.size());
    for (std::size_t i = 0; i < suite.size(); ++i) {
        CHECK(checked_in[i].attack_id == suite[i].attack_id);
        CHECK(checked_in[i].start == suite[i].start);
        CHECK(checked_in[i].end == suite[i].end);
        CHECK(checked_in[i].kind == suite[i].kind);
        CHECK(checked_in[i].value == suite[i].value);
        CHECK(checked_in[i].target == suite[i].target);
    }

    CHECK_THROWS_AS(plant::load_scenarios("./no_such_scenarios.json"), IoError);
}

TEST_CASE("standard benchmark dataset contract") {
    auto b = plant::standard_benchmark(5);

    CHECK(b.train.records() >= 20000);
    CHECK(b.test.records() >= 20000);
    CHECK(b.train.features() == 13);
    CHECK(b.test.features() == 13);

    // attack-free training data: all-normal labels
    CHECK(std::count(b.train.labels.begin(), b.train.labels.end(), 1) == 0);

    REQUIRE(b.attacks.size() == 20);
    std::set<int> ids;
    std::size_t ineffective = 0;
    for (const auto& a : b.attacks) {
        ids.insert(a.attack_id);
        ineffective += a.expected_impact_achieved ? 0 : 1;
        CHECK(a.start < a.end);
        CHECK(a.start >= b.test.timestamps.front());
        CHECK(a.end <= b.test.timestamps.back() + 1);
    }
    CHECK(ids.size() == 20);
    CHECK(*ids.begin() == 1);
    CHECK(*ids.rbegin() == 20);
    CHECK(ineffective == 2);

    // labeled records exist exactly inside attack windows
    std::size_t labeled = 0;
    for (std::size_t t = 0; t < b.test.records(); ++t) {
        const auto ts = b.test.timestamps[t];
        bool inside = false;
        for (const auto& a : b.attacks) inside = inside || (a.start <= ts && ts < a.end);
        CHECK(b.test.labels[t] == (inside ? 1 : 0));
        labeled += b.test.labels[t];
    }
    CHECK(labeled > 5000);  // the suite spends a real fraction of the run under attack

    // timestamps are contiguous 1 Hz
    for (std::size_t t = 1; t < b.test.records(); ++t)
        CHECK(b.test.timestamps[t] == b.test.timestamps[t - 1] + 1);

    // determinism across invocations
    auto b2 = plant::standard_benchmark(5);
    CHECK(b2.train.values.vec() == b.train.values.vec());
    CHECK(b2.test.values.vec() == b.test.values.vec());

    // a different seed moves the noise, not the schedule
    auto b3 = plant::standard_benchmark(6);
    CHECK(b3.test.values.vec() != b.test.values.vec());
    REQUIRE(b3.attacks.size() == 20);
    CHECK(b3.attacks[0].start == b.attacks[0].start);
}

TEST_CASE("the two no-impact attacks leave the plant bit-identical") {
    auto all = plant::benchmark_scenarios();
    std::vector<AttackScenario> effective_only;
    std::vector<AttackScenario> ineffective;
    for (const auto& a : all)
        (a.expected_impact_achieved ? effective_only : ineffective).push_back(a);
    REQUIRE(ineffective.size() == 2);

    for (std::uint64_t seed : {1ull, 4ull, 9ull}) {
        PlantConfig cfg = PlantConfig::standard();
        cfg.seed = seed ^ 0x517cc1b727220a95ull;
        auto with = plant::simulate(cfg, cfg.warmup_seconds + 21700, all);
        auto without = plant::simulate(cfg, cfg.warmup_seconds + 21700, effective_only);

        CHECK(with.true_levels.vec() == without.true_levels.vec());
        CHECK(with.true_flows.vec() == without.true_flows.vec());
        CHECK(with.data.values.vec() == without.data.values.vec());
        CHECK(with.events == without.events);
        CHECK(with.data.labels != without.data.labels);  // only the labels know
    }
}
