#pragma once

#include <string>
#include <vector>

#include "fedauth/sim_world.hpp"

namespace fedauth {

// One experiment document (structured text, "version": 1). Every field has
// a default; unknown keys are rejected before any computation runs.
struct ExperimentConfig {
    WorldConfig world;
    double separation = 3.2;      // pairwise distance between class means
    double trigger_norm = 8.0;    // attack displacement magnitude
    double poison_fraction = 1.0;
    MetricWeights weights;
    MicroClusterParams micro;
    FlagPolicy policy = FlagPolicy::largest_gap();
    std::vector<AggregationRule> rules;  // simulate runs each rule
    double percentile = 99.0;
    double shrinkage = 0.05;
    TrainingParams training;
    int rounds = 20;
    int threads = 1;
    bool auth_every_round = true;

    void validate() const;
};

// Defaults above plus the standard rule set: fedavg, trimmed_mean:0.1, and
// krum with f = max(n_poisoned, 1).
ExperimentConfig default_experiment_config();

ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const ExperimentConfig& cfg, const std::string& path);

// Assembles the runnable per-scenario config. The attack is included only
// when attack_enabled and the world declares poisoned clients.
SimConfig to_sim_config(const ExperimentConfig& cfg, bool attack_enabled, bool auth_enabled);

}  // namespace fedauth
