#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedauth/aggregation.hpp"
#include "fedauth/auth_server.hpp"
#include "fedauth/rng.hpp"

namespace fedauth {

struct WorldConfig {
    int n_clients = 50;
    int n_poisoned = 5;
    int dim = 16;
    int n_classes = 2;
    int samples_min = 100;  // client dataset sizes drawn uniformly from
    int samples_max = 300;  // [samples_min, samples_max]
    int reference_size = 500;  // golden samples per class
    int test_size = 2000;      // held-out clean test samples, split per class
    uint64_t seed = 0;

    void validate() const;
};

// The clean data-generating process standing in for the shared encoder:
// per-class Gaussian with diagonal covariance.
struct ClassSpec {
    Vec mean;
    Vec stddev;
};

struct ClassGenerator {
    std::vector<ClassSpec> classes;

    // Class c sits at (separation/sqrt(2)) * e_c with unit spread, so every
    // pair of class means is `separation` apart. Needs dim >= n_classes.
    static ClassGenerator axis_aligned(int n_classes, int dim, double separation);

    Vec sample(int label, Rng& rng) const;
    void validate(int dim) const;
};

struct AttackConfig {
    Vec trigger;  // displacement added to poisoned samples; labels are kept
    double poison_fraction = 1.0;  // fraction of a compromised client's samples poisoned

    // norm-`norm` trigger along a seeded random unit direction
    static AttackConfig random_direction(int dim, double norm, double fraction, uint64_t seed);
    void validate() const;
};

struct ClientDataset {
    std::string client_id;
    std::vector<LabeledEmbedding> samples;
};

struct World {
    int dim = 0;
    int n_classes = 0;
    uint64_t seed = 0;
    std::vector<LabeledEmbedding> reference;
    std::vector<ClientDataset> clients;  // ascending client_id
    std::vector<LabeledEmbedding> test_set;
};

World gen_world(const WorldConfig& cfg, const ClassGenerator& gen);

// Seeded sample of n_poisoned distinct client ids, sorted ascending.
std::vector<std::string> pick_poisoned_ids(const World& world, int n_poisoned);

// For each poisoned client, a seeded poison_fraction of its samples gets
// vector += trigger; labels and clean clients are untouched.
void apply_attack(std::vector<ClientDataset>& datasets, const AttackConfig& attack,
                  const std::vector<std::string>& poisoned_ids, uint64_t seed);

// Multinomial logistic classifier over embeddings. Flat layout: weight rows
// per class (n_classes x dim), then biases (n_classes); P = n_classes*(dim+1).
struct LinearModel {
    int n_classes = 0;
    int dim = 0;
    Vec params;

    static LinearModel zeros(int n_classes, int dim);
    static LinearModel from_params(int n_classes, int dim, Vec params);

    double weight(int c, int j) const { return params[static_cast<size_t>(c) * dim + j]; }
    double bias(int c) const { return params[static_cast<size_t>(n_classes) * dim + c]; }
    int predict(const Vec& x) const;  // argmax logit, ties to the lowest class
};

// Mean cross-entropy over the dataset and its gradient in the flat layout.
double model_loss(const LinearModel& model, const std::vector<LabeledEmbedding>& data);
Vec model_gradient(const LinearModel& model, const std::vector<LabeledEmbedding>& data);

struct TrainingParams {
    int epochs = 50;
    double learning_rate = 0.1;
};

// Full-batch gradient descent from the broadcast global model; returns the
// trained flat params and the local sample count.
ModelUpdate local_train(LinearModel model, const ClientDataset& data, int epochs,
                        double learning_rate);

double evaluate_accuracy(const LinearModel& model, const std::vector<LabeledEmbedding>& test);

struct RoundRecord {
    int round = 0;
    std::vector<Verdict> verdicts;  // empty when authentication is off
    Vec global_params;
    double accuracy = 0.0;
    std::map<std::string, double> local_losses;  // per participating client
    int participants = 0;
    bool aborted = false;  // no authenticated clients; model unchanged
};

// One line-delimited event per callback; see EventLog in io.hpp for the
// file form. Types: round_start, verdict, tag_issued, update_received,
// aggregated, accuracy.
struct SimSinks {
    std::function<void(const std::string& type, const std::map<std::string, std::string>&)> event;
    std::function<void(int round, const std::vector<Verdict>&, const std::vector<AnomalyReport>&)>
        verdict_file;
};

struct SimConfig {
    WorldConfig world;
    ClassGenerator generator;
    std::optional<AttackConfig> attack;  // applied when set and n_poisoned > 0
    MetricWeights weights;
    MicroClusterParams micro;
    FlagPolicy policy;
    double percentile = 99.0;
    double shrinkage = 0.05;
    TrainingParams training;
    int rounds = 20;
    int threads = 1;
    bool auth_enabled = true;
    bool auth_every_round = true;

    void validate() const;
};

struct SimState {
    SimConfig cfg;
    World world;
    std::vector<std::string> poisoned_ids;
    AuthServer auth;
    LinearModel global;
    int round = 0;
    // verdicts/tags reused on later rounds when auth_every_round is off
    std::vector<Verdict> cached_verdicts;
    std::vector<AnomalyReport> cached_reports;
    SimSinks* sinks = nullptr;  // optional, not owned
};

SimState init_simulation(const SimConfig& cfg, SimSinks* sinks = nullptr);

RoundRecord run_round(SimState& state, const AggregationRule& rule, bool auth_enabled);

struct SimResult {
    std::vector<RoundRecord> records;
    std::vector<std::string> poisoned_ids;
    // reports from the first authenticated round (scatter data source)
    std::vector<AnomalyReport> first_reports;
};

SimResult run_simulation(const SimConfig& cfg, const AggregationRule& rule,
                         SimSinks* sinks = nullptr);

}  // namespace fedauth
