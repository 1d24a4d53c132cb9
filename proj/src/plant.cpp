#include "icsad/plant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "icsad/errors.hpp"

namespace icsad::plant {

namespace {

using nlohmann::json;

// splitmix64; documented in the header so fixtures can be regenerated in any
// language. One stream per simulation, consumed in a fixed order per tick.
struct SplitMix64 {
    std::uint64_t state;
    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double gauss() {  // Irwin-Hall(12) - 6: mean 0, variance 1
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += unit();
        return s - 6.0;
    }
};

std::string signal_name(const char* prefix, std::size_t stage_1based) {
    return std::string(prefix) + std::to_string(stage_1based) + "01";
}

void validate_config(const PlantConfig& cfg) {
    if (cfg.stages.empty()) throw ConfigError("plant needs at least one stage");
    for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
        const auto& st = cfg.stages[s];
        if (!(st.capacity > st.high && st.high > st.low && st.low > 0.0))
            throw ConfigError("stage " + std::to_string(s + 1) +
                              " setpoints must satisfy capacity > high > low > 0");
        if (st.in_rate <= 0.0 || st.out_rate <= 0.0)
            throw ConfigError("stage " + std::to_string(s + 1) + " flow rates must be positive");
    }
    if (cfg.noise_std_frac < 0.0) throw ConfigError("sensor noise std must be non-negative");
    if (cfg.warmup_seconds < 0) throw ConfigError("warmup must be non-negative");
}

struct SignalIndex {
    // resolved from a scenario target name
    enum class Role { level, flow, valve, pump } role;
    std::size_t stage;  // 0-based; for flow sensors: 0..S (S = discharge)
};

SignalIndex resolve_target(const std::string& name, std::size_t stage_count) {
    for (std::size_t s = 0; s < stage_count; ++s) {
        if (name == signal_name("LIT", s + 1)) return {SignalIndex::Role::level, s};
        if (name == signal_name("MV", s + 1)) return {SignalIndex::Role::valve, s};
        if (name == signal_name("P", s + 1)) return {SignalIndex::Role::pump, s};
    }
    for (std::size_t s = 0; s <= stage_count; ++s)
        if (name == signal_name("FIT", s + 1)) return {SignalIndex::Role::flow, s};
    throw ConfigError("unknown plant signal '" + name + "'");
}

void validate_scenarios(const std::vector<AttackScenario>& scenarios, const PlantConfig& cfg) {
    for (const auto& a : scenarios) {
        if (a.end <= a.start)
            throw ConfigError("attack " + std::to_string(a.attack_id) +
                              " has an empty interval");
        if (a.start < cfg.warmup_seconds)
            throw ConfigError("attack " + std::to_string(a.attack_id) +
                              " starts inside the warmup period");
        const auto sig = resolve_target(a.target, cfg.stages.size());
        const bool sensor =
            sig.role == SignalIndex::Role::level || sig.role == SignalIndex::Role::flow;
        if (a.kind == AttackKind::force_actuator ? sensor : !sensor)
            throw ConfigError("attack " + std::to_string(a.attack_id) + ": target '" +
                              a.target +
                              (sensor ? "' is a sensor; only spoofing applies"
                                      : "' is an actuator; only forcing applies"));
    }
    for (std::size_t i = 0; i < scenarios.size(); ++i)
        for (std::size_t j = i + 1; j < scenarios.size(); ++j) {
            const auto &a = scenarios[i], &b = scenarios[j];
            if (a.target == b.target && a.start < b.end && b.start < a.end)
                throw ConfigError("attacks " + std::to_string(a.attack_id) + " and " +
                                  std::to_string(b.attack_id) + " overlap on " + a.target);
        }
}

const char* kind_tag(AttackKind k) {
    switch (k) {
        case AttackKind::stuck_sensor: return "stuck_sensor";
        case AttackKind::ramp_sensor: return "ramp_sensor";
        case AttackKind::force_actuator: return "force_actuator";
    }
    return "?";
}

AttackKind kind_from_tag(const std::string& tag) {
    if (tag == "stuck_sensor") return AttackKind::stuck_sensor;
    if (tag == "ramp_sensor") return AttackKind::ramp_sensor;
    if (tag == "force_actuator") return AttackKind::force_actuator;
    throw ConfigError("unknown attack kind '" + tag + "'");
}

}  // namespace

PlantConfig PlantConfig::standard() {
    PlantConfig cfg;
    cfg.stages = {
        {1200.0, 450.0, 850.0, 9.0, 3.0},  // raw intake: fast source, slow transfer
        {1000.0, 400.0, 750.0, 4.0, 2.2},  // buffer tank
        {900.0, 350.0, 700.0, 3.0, 1.6},   // discharge tank
    };
    cfg.noise_std_frac = 0.002;
    cfg.seed = 1;
    cfg.warmup_seconds = 600;
    return cfg;
}

data::Schema plant_schema(std::size_t stage_count) {
    data::Schema schema;
    for (std::size_t s = 0; s < stage_count; ++s) {
        const std::string tag = "P" + std::to_string(s + 1);
        schema.stages.emplace_back(signal_name("LIT", s + 1), tag);
        schema.stages.emplace_back(signal_name("FIT", s + 1), tag);
        schema.stages.emplace_back(signal_name("MV", s + 1), tag);
        schema.stages.emplace_back(signal_name("P", s + 1), tag);
        schema.categorical.push_back(signal_name("MV", s + 1));
        schema.categorical.push_back(signal_name("P", s + 1));
    }
    schema.stages.emplace_back(signal_name("FIT", stage_count + 1),
                               "P" + std::to_string(stage_count));
    return schema;
}

SimResult simulate(const PlantConfig& config, std::int64_t duration_s,
                   const std::vector<AttackScenario>& scenarios) {
    validate_config(config);
    if (duration_s < 1) throw ConfigError("simulation duration must be at least 1 second");
    validate_scenarios(scenarios, config);

    const std::size_t S = config.stages.size();
    const std::size_t T = static_cast<std::size_t>(duration_s);
    const std::size_t F = 4 * S + 1;

    SimResult r;
    r.data.values = Tensor({T, F});
    r.data.timestamps.resize(T);
    r.data.labels.assign(T, 0);
    r.true_levels = Tensor({T, S});
    r.true_flows = Tensor({T, S + 1});

    const data::Schema schema = plant_schema(S);
    for (const auto& [name, tag] : schema.stages) r.data.feature_names.push_back(name);

    for (const auto& a : scenarios) {
        data::AttackLabel row;
        row.attack_id = a.attack_id;
        row.start = a.start;
        row.end = a.end;
        row.stage_tags = {schema.stage_of(a.target)};
        row.description = a.description;
        row.expected_impact_achieved = a.expected_impact_achieved;
        r.attacks.push_back(row);
    }
    r.data.attack_table = r.attacks;

    SplitMix64 rng{config.seed};

    std::vector<double> level(S), reported(S);
    std::vector<char> valve(S, 0), pump(S, 0);
    std::vector<char> over(S, 0), under(S, 0);  // clamp-state edges for the event log
    for (std::size_t s = 0; s < S; ++s) {
        level[s] = 0.5 * (config.stages[s].low + config.stages[s].high);
        reported[s] = level[s];  // the controller's first scan sees the true level
    }

    std::vector<double> inflow(S + 1), outflow(S);

    for (std::size_t t = 0; t < T; ++t) {
        const auto now = static_cast<std::int64_t>(t);
        auto active = [&](const AttackScenario& a) { return a.start <= now && now < a.end; };

        // controller acts on the previous scan's reported levels
        for (std::size_t s = 0; s < S; ++s) {
            if (reported[s] < config.stages[s].low)
                valve[s] = 1;
            else if (reported[s] > config.stages[s].high)
                valve[s] = 0;
            pump[s] = reported[s] > config.stages[s].low ? 1 : 0;
        }
        for (const auto& a : scenarios) {
            if (a.kind != AttackKind::force_actuator || !active(a)) continue;
            const auto sig = resolve_target(a.target, S);
            (sig.role == SignalIndex::Role::valve ? valve : pump)[sig.stage] =
                a.value >= 0.5 ? 1 : 0;
        }

        // physics: a pump only moves water while the downstream valve accepts it
        inflow[0] = valve[0] ? config.stages[0].in_rate : 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            const bool downstream_open = s + 1 < S ? valve[s + 1] != 0 : true;
            double q = pump[s] && downstream_open ? config.stages[s].out_rate : 0.0;
            if (s + 1 < S) q = std::min(q, config.stages[s + 1].in_rate);
            outflow[s] = q;
            inflow[s + 1] = q;
        }
        for (std::size_t s = 0; s < S; ++s) {
            level[s] += inflow[s] - outflow[s];
            const double cap = config.stages[s].capacity;
            if (level[s] > cap) {
                level[s] = cap;
                if (!over[s])
                    r.events.push_back("t=" + std::to_string(t) + " stage " +
                                       std::to_string(s + 1) + " overflow (level clamped at " +
                                       std::to_string(cap) + ")");
                over[s] = 1;
            } else {
                over[s] = 0;
            }
            if (level[s] < 0.0) {
                level[s] = 0.0;
                if (!under[s])
                    r.events.push_back("t=" + std::to_string(t) + " stage " +
                                       std::to_string(s + 1) + " underflow (tank empty)");
                under[s] = 1;
            } else {
                under[s] = 0;
            }
        }

        // sensors: noise is drawn for every sensor every tick in a fixed
        // order, so scenario sets never shift the stream
        std::vector<double> rep_level(S), rep_flow(S + 1);
        for (std::size_t s = 0; s < S; ++s)
            rep_level[s] =
                level[s] + rng.gauss() * config.noise_std_frac * config.stages[s].capacity;
        for (std::size_t q = 0; q <= S; ++q) {
            const double full_scale =
                q == 0 ? config.stages[0].in_rate : config.stages[q - 1].out_rate;
            rep_flow[q] = inflow[q] + rng.gauss() * config.noise_std_frac * full_scale;
        }
        for (const auto& a : scenarios) {
            if (a.kind == AttackKind::force_actuator || !active(a)) continue;
            const auto sig = resolve_target(a.target, S);
            double& slot =
                sig.role == SignalIndex::Role::level ? rep_level[sig.stage] : rep_flow[sig.stage];
            if (a.kind == AttackKind::stuck_sensor)
                slot = a.value;
            else
                slot += a.value * static_cast<double>(now - a.start + 1);
        }

        r.data.timestamps[t] = now;
        for (const auto& a : scenarios)
            if (active(a)) r.data.labels[t] = 1;
        for (std::size_t s = 0; s < S; ++s) {
            r.data.values.at(t, 4 * s + 0) = rep_level[s];
            r.data.values.at(t, 4 * s + 1) = rep_flow[s];
            r.data.values.at(t, 4 * s + 2) = valve[s] ? 1.0 : 0.0;
            r.data.values.at(t, 4 * s + 3) = pump[s] ? 1.0 : 0.0;
            r.true_levels.at(t, s) = level[s];
        }
        r.data.values.at(t, 4 * S) = rep_flow[S];
        for (std::size_t q = 0; q <= S; ++q) r.true_flows.at(t, q) = inflow[q];

        reported = rep_level;  // next scan reads the (possibly spoofed) values
    }
    return r;
}

std::vector<AttackScenario> benchmark_scenarios() {
    auto mk = [](int id, std::int64_t start, std::int64_t dur, AttackKind kind, double value,
                 const char* target, const char* desc, bool effective = true) {
        AttackScenario a;
        a.attack_id = id;
        a.start = start;
        a.end = start + dur;
        a.kind = kind;
        a.value = value;
        a.target = target;
        a.description = desc;
        a.expected_impact_achieved = effective;
        return a;
    };
    using K = AttackKind;
    return {
        mk(1, 1800, 720, K::stuck_sensor, 700.0, "LIT101",
           "Level reading of tank 1 fixed at 700; tank keeps filling"),
        mk(2, 3000, 600, K::ramp_sensor, 1.0, "LIT201",
           "Increase reported LIT201 by 1 unit every second"),
        mk(3, 4100, 600, K::force_actuator, 1.0, "MV101",
           "Keep inlet valve MV101 open continuously"),
        mk(4, 5150, 150, K::force_actuator, 1.0, "P201",
           "Keep transfer pump P201 running (already running: no impact)", false),
        mk(5, 5900, 500, K::stuck_sensor, 0.0, "FIT201",
           "Transfer flow reading FIT201 forced to zero"),
        mk(6, 7000, 650, K::ramp_sensor, -0.8, "LIT301",
           "Decrease reported LIT301 by 0.8 units every second"),
        mk(7, 8200, 600, K::stuck_sensor, 430.0, "LIT101",
           "Level reading frozen below the low setpoint; valve held open"),
        mk(8, 9400, 700, K::force_actuator, 0.0, "MV201",
           "Close stage-2 inlet valve MV201"),
        mk(9, 10700, 600, K::ramp_sensor, 0.05, "FIT101",
           "Drift inlet flow reading FIT101 upward"),
        mk(10, 11900, 650, K::stuck_sensor, 575.0, "LIT201",
           "Level reading of tank 2 frozen mid-band"),
        mk(11, 13100, 650, K::force_actuator, 0.0, "P101",
           "Stop stage-1 transfer pump P101"),
        mk(12, 14350, 500, K::stuck_sensor, 1.6, "FIT401",
           "Discharge flow reading pinned at maximum"),
        mk(13, 15450, 150, K::force_actuator, 1.0, "P301",
           "Keep discharge pump P301 running (already running: no impact)", false),
        mk(14, 16100, 600, K::force_actuator, 0.0, "MV301",
           "Close stage-3 inlet valve MV301"),
        mk(15, 17300, 600, K::stuck_sensor, 680.0, "LIT301",
           "Level reading of tank 3 frozen near the high setpoint"),
        mk(16, 18500, 650, K::ramp_sensor, -0.005, "FIT301",
           "Drift stage-3 inlet flow reading downward"),
        mk(17, 19750, 600, K::force_actuator, 0.0, "P301",
           "Stop the discharge pump"),
        mk(18, 20950, 700, K::stuck_sensor, 380.0, "LIT201",
           "Level reading of tank 2 frozen below the low setpoint"),
        mk(19, 1250, 450, K::ramp_sensor, -1.2, "LIT101",
           "Decrease reported LIT101 by 1.2 units every second; valve held open"),
        mk(20, 21850, 350, K::force_actuator, 1.0, "MV101",
           "Keep inlet valve MV101 open continuously"),
    };
}

std::vector<AttackScenario> load_scenarios(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw IoError("scenario file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!doc.is_array()) throw IoError("scenario file must hold a JSON array");
    std::vector<AttackScenario> out;
    for (const auto& row : doc) {
        AttackScenario a;
        try {
            a.attack_id = row.at("attack_id").get<int>();
            a.start = row.at("start").get<std::int64_t>();
            a.end = row.at("end").get<std::int64_t>();
            a.kind = kind_from_tag(row.at("kind").get<std::string>());
            a.value = row.at("value").get<double>();
            a.target = row.at("target").get<std::string>();
            a.expected_impact_achieved = row.at("expected_impact_achieved").get<bool>();
            a.description = row.value("description", std::string());
        } catch (const json::exception& e) {
            throw IoError("scenario file '" + path + "': bad row: " + e.what());
        }
        out.push_back(std::move(a));
    }
    return out;
}

void save_scenarios(const std::string& path, const std::vector<AttackScenario>& scenarios) {
    json doc = json::array();
    for (const auto& a : scenarios)
        doc.push_back({{"attack_id", a.attack_id},
                       {"start", a.start},
                       {"end", a.end},
                       {"kind", kind_tag(a.kind)},
                       {"value", a.value},
                       {"target", a.target},
                       {"expected_impact_achieved", a.expected_impact_achieved},
                       {"description", a.description}});
    std::ofstream out(path);
    if (!out) throw IoError("cannot write scenario file '" + path + "'");
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("failed writing scenario file '" + path + "'");
}

Benchmark standard_benchmark(std::uint64_t seed) {
    PlantConfig cfg = PlantConfig::standard();
    cfg.seed = seed;

    Benchmark b;
    b.schema = plant_schema(cfg.stages.size());

    auto train_sim = simulate(cfg, cfg.warmup_seconds + 20400, {});
    b.train = data::trim_warmup(train_sim.data,
                                static_cast<std::size_t>(cfg.warmup_seconds));

    PlantConfig test_cfg = cfg;
    test_cfg.seed = seed ^ 0x517cc1b727220a95ull;  // independent noise stream
    auto test_sim = simulate(test_cfg, test_cfg.warmup_seconds + 21700, benchmark_scenarios());
    b.test = data::trim_warmup(test_sim.data,
                               static_cast<std::size_t>(test_cfg.warmup_seconds));
    b.attacks = test_sim.attacks;
    return b;
}

}  // namespace icsad::plant
