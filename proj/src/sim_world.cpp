#include "fedauth/sim_world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedauth/io.hpp"
#include "fedauth/parallel.hpp"

namespace fedauth {

void WorldConfig::validate() const {
    if (n_clients < 1) throw InvalidConfig("n_clients must be >= 1");
    if (n_poisoned < 0 || n_poisoned > n_clients)
        throw InvalidConfig("n_poisoned must lie in [0, n_clients]");
    if (dim < 1) throw InvalidConfig("dim must be >= 1");
    if (n_classes < 2) throw InvalidConfig("n_classes must be >= 2");
    if (samples_min < 1 || samples_max < samples_min)
        throw InvalidConfig("samples_per_client range must satisfy 1 <= min <= max");
    if (reference_size < 2) throw InvalidConfig("reference_size must be >= 2 per class");
    if (test_size < n_classes) throw InvalidConfig("test_size must cover every class");
}

ClassGenerator ClassGenerator::axis_aligned(int n_classes, int dim, double separation) {
    if (dim < n_classes)
        throw InvalidConfig("axis-aligned generator needs dim >= n_classes");
    if (!(separation > 0.0)) throw InvalidConfig("class separation must be > 0");
    ClassGenerator gen;
    double offset = separation / std::sqrt(2.0);
    for (int c = 0; c < n_classes; ++c) {
        ClassSpec spec;
        spec.mean.assign(dim, 0.0);
        spec.mean[c] = offset;
        spec.stddev.assign(dim, 1.0);
        gen.classes.push_back(std::move(spec));
    }
    return gen;
}

void ClassGenerator::validate(int dim) const {
    if (classes.size() < 2) throw InvalidConfig("generator needs >= 2 classes");
    for (const ClassSpec& spec : classes) {
        if (static_cast<int>(spec.mean.size()) != dim ||
            static_cast<int>(spec.stddev.size()) != dim)
            throw InvalidConfig("generator class spec dimension != world dim");
        for (double s : spec.stddev)
            if (!(s > 0.0)) throw InvalidConfig("generator stddev entries must be > 0");
    }
    for (size_t a = 0; a < classes.size(); ++a)
        for (size_t b = a + 1; b < classes.size(); ++b)
            if (classes[a].mean == classes[b].mean)
                throw InvalidConfig("class means must be pairwise distinct");
}

Vec ClassGenerator::sample(int label, Rng& rng) const {
    const ClassSpec& spec = classes.at(label);
    Vec x(spec.mean.size());
    for (size_t i = 0; i < x.size(); ++i) x[i] = spec.mean[i] + spec.stddev[i] * rng.normal();
    return x;
}

AttackConfig AttackConfig::random_direction(int dim, double norm, double fraction, uint64_t seed) {
    if (!(norm > 0.0)) throw InvalidConfig("trigger norm must be > 0");
    Rng rng(derive_seed(seed, "trigger"));
    Vec dir(dim);
    double len = 0.0;
    do {
        for (int i = 0; i < dim; ++i) dir[i] = rng.normal();
        len = euclidean_norm(dir);
    } while (len == 0.0);
    for (int i = 0; i < dim; ++i) dir[i] *= norm / len;
    AttackConfig atk;
    atk.trigger = std::move(dir);
    atk.poison_fraction = fraction;
    atk.validate();
    return atk;
}

void AttackConfig::validate() const {
    if (euclidean_norm(trigger) == 0.0) throw InvalidConfig("trigger must have nonzero norm");
    if (!(poison_fraction > 0.0 && poison_fraction <= 1.0))
        throw InvalidConfig("poison_fraction must lie in (0, 1]");
}

static std::string client_name(int index, int n_clients) {
    int width = 1;
    for (int v = n_clients - 1; v >= 10; v /= 10) ++width;
    std::string digits = std::to_string(index);
    return "client_" + std::string(static_cast<size_t>(width) - digits.size(), '0') + digits;
}

World gen_world(const WorldConfig& cfg, const ClassGenerator& gen) {
    cfg.validate();
    gen.validate(cfg.dim);
    if (static_cast<int>(gen.classes.size()) != cfg.n_classes)
        throw InvalidConfig("generator class count != n_classes");

    World world;
    world.dim = cfg.dim;
    world.n_classes = cfg.n_classes;
    world.seed = cfg.seed;

    // Reference and test sets come from the same clean generator; every
    // stream gets its own derived seed so draws are order-independent.
    for (int c = 0; c < cfg.n_classes; ++c) {
        Rng rng(derive_seed(cfg.seed, "reference", static_cast<uint64_t>(c)));
        for (int i = 0; i < cfg.reference_size; ++i)
            world.reference.push_back({gen.sample(c, rng), c});
    }
    int per_class_test = cfg.test_size / cfg.n_classes;
    for (int c = 0; c < cfg.n_classes; ++c) {
        Rng rng(derive_seed(cfg.seed, "test", static_cast<uint64_t>(c)));
        int count = per_class_test + (c < cfg.test_size % cfg.n_classes ? 1 : 0);
        for (int i = 0; i < count; ++i) world.test_set.push_back({gen.sample(c, rng), c});
    }

    for (int i = 0; i < cfg.n_clients; ++i) {
        Rng rng(derive_seed(cfg.seed, "client", static_cast<uint64_t>(i)));
        ClientDataset ds;
        ds.client_id = client_name(i, cfg.n_clients);
        int size = cfg.samples_min +
                   static_cast<int>(rng.bounded(static_cast<uint64_t>(cfg.samples_max - cfg.samples_min + 1)));
        ds.samples.reserve(size);
        for (int s = 0; s < size; ++s) {
            int label = static_cast<int>(rng.bounded(static_cast<uint64_t>(cfg.n_classes)));
            ds.samples.push_back({gen.sample(label, rng), label});
        }
        world.clients.push_back(std::move(ds));
    }
    return world;
}

std::vector<std::string> pick_poisoned_ids(const World& world, int n_poisoned) {
    if (n_poisoned < 0 || n_poisoned > static_cast<int>(world.clients.size()))
        throw InvalidConfig("n_poisoned out of range");
    std::vector<int> indices(world.clients.size());
    std::iota(indices.begin(), indices.end(), 0);
    Rng rng(derive_seed(world.seed, "poisoned_ids"));
    for (int i = 0; i < n_poisoned; ++i) {
        size_t j = i + rng.bounded(indices.size() - i);
        std::swap(indices[i], indices[j]);
    }
    std::vector<std::string> ids;
    for (int i = 0; i < n_poisoned; ++i) ids.push_back(world.clients[indices[i]].client_id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

void apply_attack(std::vector<ClientDataset>& datasets, const AttackConfig& attack,
                  const std::vector<std::string>& poisoned_ids, uint64_t seed) {
    attack.validate();
    for (const std::string& id : poisoned_ids) {
        auto it = std::find_if(datasets.begin(), datasets.end(),
                               [&](const ClientDataset& d) { return d.client_id == id; });
        if (it == datasets.end()) throw UnknownClient("poisoned id " + id + " not in world");
        ClientDataset& ds = *it;
        if (!ds.samples.empty() &&
            ds.samples.front().vector.size() != attack.trigger.size())
            throw DimMismatch("trigger dim " + std::to_string(attack.trigger.size()) +
                              " != data dim " + std::to_string(ds.samples.front().vector.size()));

        const size_t n = ds.samples.size();
        const auto k = static_cast<size_t>(std::llround(attack.poison_fraction * static_cast<double>(n)));
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(seed, "attack:" + id));
        for (size_t i = 0; i < k && i < n; ++i) {
            size_t j = i + rng.bounded(n - i);
            std::swap(order[i], order[j]);
        }
        for (size_t i = 0; i < k && i < n; ++i) {
            Vec& v = ds.samples[order[i]].vector;
            for (size_t d = 0; d < v.size(); ++d) v[d] += attack.trigger[d];
        }
    }
}

LinearModel LinearModel::zeros(int n_classes, int dim) {
    LinearModel m;
    m.n_classes = n_classes;
    m.dim = dim;
    m.params.assign(static_cast<size_t>(n_classes) * (dim + 1), 0.0);
    return m;
}

LinearModel LinearModel::from_params(int n_classes, int dim, Vec params) {
    if (params.size() != static_cast<size_t>(n_classes) * (dim + 1))
        throw DimMismatch("param vector length " + std::to_string(params.size()) +
                          " != n_classes*(dim+1)");
    LinearModel m;
    m.n_classes = n_classes;
    m.dim = dim;
    m.params = std::move(params);
    return m;
}

static void logits_of(const LinearModel& model, const Vec& x, std::vector<double>& logits) {
    logits.resize(model.n_classes);
    for (int c = 0; c < model.n_classes; ++c) {
        double z = model.bias(c);
        const double* w = model.params.data() + static_cast<size_t>(c) * model.dim;
        for (int j = 0; j < model.dim; ++j) z += w[j] * x[j];
        logits[c] = z;
    }
}

int LinearModel::predict(const Vec& x) const {
    std::vector<double> logits;
    logits_of(*this, x, logits);
    int best = 0;
    for (int c = 1; c < n_classes; ++c)
        if (logits[c] > logits[best]) best = c;
    return best;
}

// softmax probabilities with max-subtraction; returns log-sum-exp of shifted
// logits for the loss
static double softmax_inplace(std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& z : logits) {
        z = std::exp(z - mx);
        sum += z;
    }
    for (double& z : logits) z /= sum;
    return std::log(sum) + mx;
}

double model_loss(const LinearModel& model, const std::vector<LabeledEmbedding>& data) {
    if (data.empty()) throw EmptyDataset("loss over zero samples");
    double loss = 0.0;
    std::vector<double> logits;
    for (const LabeledEmbedding& e : data) {
        logits_of(model, e.vector, logits);
        double z_y = logits[e.label];
        loss += softmax_inplace(logits) - z_y;
    }
    return loss / static_cast<double>(data.size());
}

Vec model_gradient(const LinearModel& model, const std::vector<LabeledEmbedding>& data) {
    if (data.empty()) throw EmptyDataset("gradient over zero samples");
    Vec grad(model.params.size(), 0.0);
    std::vector<double> probs;
    for (const LabeledEmbedding& e : data) {
        logits_of(model, e.vector, probs);
        softmax_inplace(probs);
        for (int c = 0; c < model.n_classes; ++c) {
            double delta = probs[c] - (c == e.label ? 1.0 : 0.0);
            double* gw = grad.data() + static_cast<size_t>(c) * model.dim;
            for (int j = 0; j < model.dim; ++j) gw[j] += delta * e.vector[j];
            grad[static_cast<size_t>(model.n_classes) * model.dim + c] += delta;
        }
    }
    double inv_n = 1.0 / static_cast<double>(data.size());
    for (double& g : grad) g *= inv_n;
    return grad;
}

ModelUpdate local_train(LinearModel model, const ClientDataset& data, int epochs,
                        double learning_rate) {
    if (data.samples.empty()) throw EmptyDataset("client " + data.client_id + " has no samples");
    if (epochs < 0) throw InvalidConfig("epochs must be >= 0");
    for (int e = 0; e < epochs; ++e) {
        Vec grad = model_gradient(model, data.samples);
        for (size_t i = 0; i < model.params.size(); ++i)
            model.params[i] -= learning_rate * grad[i];
    }
    ModelUpdate update;
    update.client_id = data.client_id;
    update.params = std::move(model.params);
    update.n_samples = static_cast<int>(data.samples.size());
    return update;
}

double evaluate_accuracy(const LinearModel& model, const std::vector<LabeledEmbedding>& test) {
    if (test.empty()) throw EmptyDataset("accuracy over zero samples");
    int correct = 0;
    for (const LabeledEmbedding& e : test)
        if (model.predict(e.vector) == e.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

void SimConfig::validate() const {
    world.validate();
    weights.validate();
    micro.validate();
    if (!(percentile > 0.0 && percentile <= 100.0))
        throw InvalidConfig("reference percentile must lie in (0, 100]");
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0))
        throw InvalidConfig("shrinkage must lie in [0, 1]");
    if (training.epochs < 0) throw InvalidConfig("training epochs must be >= 0");
    if (!(training.learning_rate > 0.0)) throw InvalidConfig("learning rate must be > 0");
    if (rounds < 1) throw InvalidConfig("rounds must be >= 1");
    if (threads < 1) throw InvalidConfig("threads must be >= 1");
    if (attack && world.n_poisoned > 0) attack->validate();
}

static void emit(SimSinks* sinks, const std::string& type,
                 std::map<std::string, std::string> fields) {
    if (sinks && sinks->event) sinks->event(type, fields);
}

SimState init_simulation(const SimConfig& cfg, SimSinks* sinks) {
    cfg.validate();

    SimState state;
    state.cfg = cfg;
    state.world = gen_world(cfg.world, cfg.generator);
    if (cfg.attack && cfg.world.n_poisoned > 0) {
        state.poisoned_ids = pick_poisoned_ids(state.world, cfg.world.n_poisoned);
        apply_attack(state.world.clients, *cfg.attack, state.poisoned_ids, cfg.world.seed);
    }

    state.auth.model = build_reference_model(state.world.reference, cfg.world.n_classes,
                                             cfg.percentile, cfg.shrinkage);
    state.auth.ref_data = group_reference_by_class(state.world.reference);
    state.auth.weights = cfg.weights;
    state.auth.micro = cfg.micro;
    state.auth.policy = cfg.policy;
    state.auth.seed = cfg.world.seed;

    state.global = LinearModel::zeros(cfg.world.n_classes, cfg.world.dim);
    state.sinks = sinks;
    return state;
}

RoundRecord run_round(SimState& state, const AggregationRule& rule, bool auth_enabled) {
    RoundRecord record;
    record.round = state.round;
    emit(state.sinks, "round_start", {{"round", std::to_string(state.round)}});

    // authentication stage: embeddings are the client's current local
    // vectors; poisoned clients expose their poisoned data
    std::vector<const ClientDataset*> participants;
    if (auth_enabled) {
        bool fresh = state.cfg.auth_every_round || state.cached_verdicts.empty();
        if (fresh) {
            std::vector<ClientSubmission> subs;
            subs.reserve(state.world.clients.size());
            for (const ClientDataset& ds : state.world.clients)
                subs.push_back({ds.client_id, ds.samples});
            AuthServer::RoundResult auth =
                state.auth.authenticate_round(subs, state.round, state.cfg.threads);
            state.cached_verdicts = auth.verdicts;
            state.cached_reports = auth.reports;
            for (const Verdict& v : auth.verdicts) {
                emit(state.sinks, "verdict",
                     {{"round", std::to_string(state.round)},
                      {"client_id", v.client_id},
                      {"rank", std::to_string(v.rank)},
                      {"status", status_name(v.status)}});
            }
            for (const VerificationTag& tag : auth.tags) {
                emit(state.sinks, "tag_issued",
                     {{"round", std::to_string(state.round)},
                      {"client_id", tag.client_id},
                      {"nonce", nonce_hex(tag.nonce)}});
            }
            if (state.sinks && state.sinks->verdict_file)
                state.sinks->verdict_file(state.round, auth.verdicts, auth.reports);
        }
        record.verdicts = state.cached_verdicts;

        std::vector<std::string> allowed;
        for (const Verdict& v : state.cached_verdicts)
            if (v.status == Status::Authentic) allowed.push_back(v.client_id);
        std::sort(allowed.begin(), allowed.end());
        for (const ClientDataset& ds : state.world.clients)
            if (std::binary_search(allowed.begin(), allowed.end(), ds.client_id))
                participants.push_back(&ds);
    } else {
        for (const ClientDataset& ds : state.world.clients) participants.push_back(&ds);
    }
    record.participants = static_cast<int>(participants.size());

    if (participants.empty()) {
        record.aborted = true;
        record.global_params = state.global.params;
        record.accuracy = evaluate_accuracy(state.global, state.world.test_set);
        emit(state.sinks, "aggregated",
             {{"round", std::to_string(state.round)},
              {"rule", rule.name()},
              {"participants", "0"},
              {"aborted", "true"}});
        emit(state.sinks, "accuracy",
             {{"round", std::to_string(state.round)},
              {"value", format_double(record.accuracy)}});
        ++state.round;
        return record;
    }

    // training stage: broadcast, local full-batch descent, merge ascending id
    std::vector<ModelUpdate> updates(participants.size());
    parallel_for(participants.size(), state.cfg.threads, [&](size_t i) {
        updates[i] = local_train(state.global, *participants[i], state.cfg.training.epochs,
                                 state.cfg.training.learning_rate);
    });
    for (size_t i = 0; i < participants.size(); ++i) {
        LinearModel trained = LinearModel::from_params(state.global.n_classes, state.global.dim,
                                                       updates[i].params);
        double loss = model_loss(trained, participants[i]->samples);
        record.local_losses[updates[i].client_id] = loss;
        updates[i].params = std::move(trained.params);
        emit(state.sinks, "update_received",
             {{"round", std::to_string(state.round)},
              {"client_id", updates[i].client_id},
              {"n_samples", std::to_string(updates[i].n_samples)}});
    }

    state.global.params = aggregate(updates, rule);
    emit(state.sinks, "aggregated",
         {{"round", std::to_string(state.round)},
          {"rule", rule.name()},
          {"participants", std::to_string(record.participants)}});

    record.global_params = state.global.params;
    record.accuracy = evaluate_accuracy(state.global, state.world.test_set);
    emit(state.sinks, "accuracy",
         {{"round", std::to_string(state.round)}, {"value", format_double(record.accuracy)}});

    ++state.round;
    return record;
}

SimResult run_simulation(const SimConfig& cfg, const AggregationRule& rule, SimSinks* sinks) {
    SimState state = init_simulation(cfg, sinks);
    SimResult result;
    result.poisoned_ids = state.poisoned_ids;
    for (int r = 0; r < cfg.rounds; ++r) {
        result.records.push_back(run_round(state, rule, cfg.auth_enabled));
        if (r == 0) result.first_reports = state.cached_reports;
    }
    return result;
}

}  // namespace fedauth
