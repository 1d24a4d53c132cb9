#pragma once

// Discrete-time (1 Hz) simulator of a small multi-stage tank plant. Each
// stage is a tank with an inlet valve and an outlet pump; the controller
// applies hysteresis on the level sensor (valve opens below `low`, closes
// above `high`) and runs the pump while the level is above `low`. Water
// moves stage to stage; the last pump discharges out of the plant.
//
// Attacks either spoof a REPORTED sensor value — the controller then acts on
// the spoofed reading while true physics evolves, so a level frozen below
// the low setpoint really does overflow the tank — or force an actuator
// regardless of the controller's command.
//
// Sensor noise comes from an explicit portable generator: splitmix64 mapped
// to [0,1) via (x >> 11) * 2^-53, with a Gaussian sample formed as the sum
// of twelve uniforms minus 6 (Irwin-Hall). No platform-dependent calls.

#include <cstdint>
#include <string>
#include <vector>

#include "icsad/data.hpp"
#include "icsad/tensor.hpp"

namespace icsad::plant {

struct StageConfig {
    double capacity = 1200.0;  // level units (mm-equivalent)
    double low = 450.0;        // pump/valve setpoints; capacity > high > low > 0
    double high = 850.0;
    double in_rate = 9.0;   // inlet line capacity, units/s (stage 1: source flow)
    double out_rate = 3.0;  // pump transfer rate, units/s
};

struct PlantConfig {
    std::vector<StageConfig> stages;  // upstream first
    double noise_std_frac = 0.002;    // sensor noise std, fraction of full scale
    std::uint64_t seed = 1;
    std::int64_t warmup_seconds = 600;

    static PlantConfig standard();  // the 3-stage desk plant
};

enum class AttackKind { stuck_sensor, ramp_sensor, force_actuator };

struct AttackScenario {
    int attack_id = 0;
    std::int64_t start = 0, end = 0;  // seconds, half-open [start, end)
    AttackKind kind = AttackKind::stuck_sensor;
    // stuck_sensor: the reported value; ramp_sensor: delta per second, the
    // reported value gains value*(t - start + 1); force_actuator: >= 0.5 on.
    double value = 0.0;
    std::string target;  // signal name: LIT*/FIT* for spoofs, MV*/P* for forcing
    bool expected_impact_achieved = true;
    std::string description;
};

// Per stage s (1-based): LIT<s>01 level, FIT<s>01 inlet flow, MV<s>01 inlet
// valve, P<s>01 outlet pump; plus FIT<S+1>01, the plant discharge flow.
// Stage tags are "P1".."P<S>"; the discharge sensor belongs to the last stage.
data::Schema plant_schema(std::size_t stage_count);

struct SimResult {
    data::RawDataset data;                  // reported values, labels, attack table
    std::vector<data::AttackLabel> attacks;
    std::vector<std::string> events;        // overflow/underflow transitions
    Tensor true_levels;                     // [records, stages]
    Tensor true_flows;                      // [records, stages+1]; column s is the
                                            // inflow of stage s, last is discharge
};

SimResult simulate(const PlantConfig& config, std::int64_t duration_s,
                   const std::vector<AttackScenario>& scenarios);

// The fixed 20-attack suite used by the benchmark: every kind, every stage,
// two force_actuator rows flagged expected_impact_achieved=false (they
// command a state the controller already holds, so the plant is unaffected).
std::vector<AttackScenario> benchmark_scenarios();

std::vector<AttackScenario> load_scenarios(const std::string& path);
void save_scenarios(const std::string& path, const std::vector<AttackScenario>& scenarios);

struct Benchmark {
    data::RawDataset train;  // attack-free, warmup trimmed
    data::RawDataset test;   // contains the 20 scripted attacks
    std::vector<data::AttackLabel> attacks;
    data::Schema schema;
};

// Deterministic desk-scale stand-in for a multi-day plant recording:
// >= 20000 s of attack-free training data and >= 20000 s of test data with
// the scripted attack suite. The seed drives sensor noise only.
Benchmark standard_benchmark(std::uint64_t seed);

}  // namespace icsad::plant
