#include "fedauth/config.hpp"

#include <fstream>
#include <initializer_list>

#include "json.hpp"

#include "fedauth/io.hpp"

namespace fedauth {

using nlohmann::json;

void ExperimentConfig::validate() const {
    world.validate();
    weights.validate();
    micro.validate();
    if (!(separation > 0.0)) throw InvalidConfig("separation must be > 0");
    if (!(trigger_norm > 0.0)) throw InvalidConfig("trigger_norm must be > 0");
    if (!(poison_fraction > 0.0 && poison_fraction <= 1.0))
        throw InvalidConfig("poison_fraction must lie in (0, 1]");
    if (rules.empty()) throw InvalidConfig("rules must not be empty");
    if (!(percentile > 0.0 && percentile <= 100.0))
        throw InvalidConfig("percentile must lie in (0, 100]");
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw InvalidConfig("shrinkage must lie in [0, 1]");
    if (training.epochs < 0) throw InvalidConfig("training epochs must be >= 0");
    if (!(training.learning_rate > 0.0)) throw InvalidConfig("learning rate must be > 0");
    if (rounds < 1) throw InvalidConfig("rounds must be >= 1");
    if (threads < 1) throw InvalidConfig("threads must be >= 1");
}

ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    int f = cfg.world.n_poisoned > 0 ? cfg.world.n_poisoned : 1;
    cfg.rules = {AggregationRule::fedavg(), AggregationRule::trimmed_mean(0.1),
                 AggregationRule::krum(f)};
    return cfg;
}

namespace {

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known) throw InvalidConfig("unknown key '" + item.key() + "' in " + where);
    }
}

const json& expect_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw InvalidConfig(where + " must be an object");
    return j;
}

double get_num(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw InvalidConfig(std::string(key) + " must be a number");
    return v.get<double>();
}

int get_int(const json& obj, const char* key, int fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw InvalidConfig(std::string(key) + " must be an integer");
    return v.get<int>();
}

uint64_t get_seed(const json& obj, const char* key, uint64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<int64_t>() < 0))
        throw InvalidConfig(std::string(key) + " must be a non-negative integer");
    return v.get<uint64_t>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw InvalidConfig(std::string(key) + " must be a boolean");
    return v.get<bool>();
}

std::string get_str(const json& obj, const char* key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) throw InvalidConfig(std::string(key) + " must be a string");
    return v.get<std::string>();
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    expect_object(doc, "config");

    if (!doc.contains("version")) throw ParseError(path + ": missing version field");
    if (!doc.at("version").is_number_integer() || doc.at("version").get<int>() != 1)
        throw UnsupportedVersion("config version " + doc.at("version").dump() +
                                 " (supported: 1)");

    check_keys(doc, "config",
               {"version", "world", "generator", "attack", "weights", "micro", "policy", "rules",
                "percentile", "shrinkage", "training", "rounds", "threads", "auth_every_round"});

    ExperimentConfig cfg = default_experiment_config();

    if (doc.contains("world")) {
        const json& w = expect_object(doc.at("world"), "world");
        check_keys(w, "world",
                   {"n_clients", "n_poisoned", "dim", "n_classes", "samples_min", "samples_max",
                    "reference_size", "test_size", "seed"});
        cfg.world.n_clients = get_int(w, "n_clients", cfg.world.n_clients);
        cfg.world.n_poisoned = get_int(w, "n_poisoned", cfg.world.n_poisoned);
        cfg.world.dim = get_int(w, "dim", cfg.world.dim);
        cfg.world.n_classes = get_int(w, "n_classes", cfg.world.n_classes);
        cfg.world.samples_min = get_int(w, "samples_min", cfg.world.samples_min);
        cfg.world.samples_max = get_int(w, "samples_max", cfg.world.samples_max);
        cfg.world.reference_size = get_int(w, "reference_size", cfg.world.reference_size);
        cfg.world.test_size = get_int(w, "test_size", cfg.world.test_size);
        cfg.world.seed = get_seed(w, "seed", cfg.world.seed);
    }
    if (doc.contains("generator")) {
        const json& g = expect_object(doc.at("generator"), "generator");
        check_keys(g, "generator", {"separation"});
        cfg.separation = get_num(g, "separation", cfg.separation);
    }
    if (doc.contains("attack")) {
        const json& a = expect_object(doc.at("attack"), "attack");
        check_keys(a, "attack", {"trigger_norm", "poison_fraction"});
        cfg.trigger_norm = get_num(a, "trigger_norm", cfg.trigger_norm);
        cfg.poison_fraction = get_num(a, "poison_fraction", cfg.poison_fraction);
    }
    if (doc.contains("weights")) {
        const json& w = expect_object(doc.at("weights"), "weights");
        check_keys(w, "weights", {"w_f", "w_m", "w_c", "p"});
        cfg.weights.w_f = get_num(w, "w_f", cfg.weights.w_f);
        cfg.weights.w_m = get_num(w, "w_m", cfg.weights.w_m);
        cfg.weights.w_c = get_num(w, "w_c", cfg.weights.w_c);
        cfg.weights.p = get_num(w, "p", cfg.weights.p);
    }
    if (doc.contains("micro")) {
        const json& m = expect_object(doc.at("micro"), "micro");
        check_keys(m, "micro", {"purity_min", "centroid_factor", "compact_ratio", "restarts"});
        cfg.micro.purity_min = get_num(m, "purity_min", cfg.micro.purity_min);
        cfg.micro.centroid_factor = get_num(m, "centroid_factor", cfg.micro.centroid_factor);
        cfg.micro.compact_ratio = get_num(m, "compact_ratio", cfg.micro.compact_ratio);
        cfg.micro.restarts = get_int(m, "restarts", cfg.micro.restarts);
    }
    cfg.policy = FlagPolicy::parse(get_str(doc, "policy", cfg.policy.name()));
    if (doc.contains("rules")) {
        const json& r = doc.at("rules");
        if (!r.is_array()) throw InvalidConfig("rules must be an array of rule strings");
        cfg.rules.clear();
        for (const json& item : r) {
            if (!item.is_string()) throw InvalidConfig("rules entries must be strings");
            cfg.rules.push_back(AggregationRule::parse(item.get<std::string>()));
        }
    } else if (cfg.world.n_poisoned > 0) {
        // keep the default krum budget aligned with the configured world
        cfg.rules.back() = AggregationRule::krum(cfg.world.n_poisoned);
    }
    cfg.percentile = get_num(doc, "percentile", cfg.percentile);
    cfg.shrinkage = get_num(doc, "shrinkage", cfg.shrinkage);
    if (doc.contains("training")) {
        const json& t = expect_object(doc.at("training"), "training");
        check_keys(t, "training", {"epochs", "learning_rate"});
        cfg.training.epochs = get_int(t, "epochs", cfg.training.epochs);
        cfg.training.learning_rate = get_num(t, "learning_rate", cfg.training.learning_rate);
    }
    cfg.rounds = get_int(doc, "rounds", cfg.rounds);
    cfg.threads = get_int(doc, "threads", cfg.threads);
    cfg.auth_every_round = get_bool(doc, "auth_every_round", cfg.auth_every_round);

    cfg.validate();
    return cfg;
}

void save_experiment_config(const ExperimentConfig& cfg, const std::string& path) {
    nlohmann::ordered_json doc;
    doc["version"] = 1;
    doc["world"] = {{"n_clients", cfg.world.n_clients},
                    {"n_poisoned", cfg.world.n_poisoned},
                    {"dim", cfg.world.dim},
                    {"n_classes", cfg.world.n_classes},
                    {"samples_min", cfg.world.samples_min},
                    {"samples_max", cfg.world.samples_max},
                    {"reference_size", cfg.world.reference_size},
                    {"test_size", cfg.world.test_size},
                    {"seed", cfg.world.seed}};
    doc["generator"] = {{"separation", cfg.separation}};
    doc["attack"] = {{"trigger_norm", cfg.trigger_norm}, {"poison_fraction", cfg.poison_fraction}};
    doc["weights"] = {{"w_f", cfg.weights.w_f},
                      {"w_m", cfg.weights.w_m},
                      {"w_c", cfg.weights.w_c},
                      {"p", cfg.weights.p}};
    doc["micro"] = {{"purity_min", cfg.micro.purity_min},
                    {"centroid_factor", cfg.micro.centroid_factor},
                    {"compact_ratio", cfg.micro.compact_ratio},
                    {"restarts", cfg.micro.restarts}};
    doc["policy"] = cfg.policy.name();
    std::vector<std::string> rule_names;
    for (const AggregationRule& rule : cfg.rules) rule_names.push_back(rule.name());
    doc["rules"] = rule_names;
    doc["percentile"] = cfg.percentile;
    doc["shrinkage"] = cfg.shrinkage;
    doc["training"] = {{"epochs", cfg.training.epochs},
                       {"learning_rate", cfg.training.learning_rate}};
    doc["rounds"] = cfg.rounds;
    doc["threads"] = cfg.threads;
    doc["auth_every_round"] = cfg.auth_every_round;

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path);
}

SimConfig to_sim_config(const ExperimentConfig& cfg, bool attack_enabled, bool auth_enabled) {
    cfg.validate();
    SimConfig sim;
    sim.world = cfg.world;
    if (!attack_enabled) sim.world.n_poisoned = 0;
    sim.generator = ClassGenerator::axis_aligned(cfg.world.n_classes, cfg.world.dim, cfg.separation);
    if (attack_enabled && cfg.world.n_poisoned > 0)
        sim.attack = AttackConfig::random_direction(cfg.world.dim, cfg.trigger_norm,
                                                    cfg.poison_fraction, cfg.world.seed);
    sim.weights = cfg.weights;
    sim.micro = cfg.micro;
    sim.policy = cfg.policy;
    sim.percentile = cfg.percentile;
    sim.shrinkage = cfg.shrinkage;
    sim.training = cfg.training;
    sim.rounds = cfg.rounds;
    sim.threads = cfg.threads;
    sim.auth_enabled = auth_enabled;
    sim.auth_every_round = cfg.auth_every_round;
    return sim;
}

}  // namespace fedauth
