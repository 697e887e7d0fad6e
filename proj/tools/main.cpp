#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fedauth/config.hpp"
#include "fedauth/io.hpp"

namespace fs = std::filesystem;
using namespace fedauth;

namespace {

MetricWeights parse_weights(const std::string& spec) {
    std::vector<double> parts;
    size_t start = 0;
    while (start <= spec.size()) {
        size_t comma = spec.find(',', start);
        std::string token = spec.substr(start, comma == std::string::npos ? comma : comma - start);
        try {
            size_t used = 0;
            parts.push_back(std::stod(token, &used));
            if (used != token.size()) throw std::invalid_argument(token);
        } catch (const std::logic_error&) {
            throw InvalidConfig("bad weights component '" + token + "'");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (parts.size() != 4)
        throw InvalidConfig("--weights expects wF,wM,wC,p (4 comma-separated numbers)");
    MetricWeights w;
    w.w_f = parts[0];
    w.w_m = parts[1];
    w.w_c = parts[2];
    w.p = parts[3];
    w.validate();
    return w;
}

void check_dim(const std::vector<EmbeddingRow>& rows, int dim, const std::string& what) {
    if (!rows.empty() && static_cast<int>(rows.front().vector.size()) != dim)
        throw DimMismatch(what + " are " + std::to_string(rows.front().vector.size()) +
                          "-dimensional, model expects " + std::to_string(dim));
}

std::string cell_dir_name(const AggregationRule& rule, const std::string& scenario) {
    std::string name = rule.name();
    for (char& c : name)
        if (c == ':') c = '-';
    return name + "_" + scenario;
}

int run_genref(const std::string& embeddings_path, const std::string& out_path, int n_classes,
               double percentile, double shrinkage) {
    std::vector<EmbeddingRow> rows = read_embeddings(embeddings_path);
    if (rows.empty()) throw EmptyInput("no data rows in " + embeddings_path);
    ReferenceModel model =
        build_reference_model(to_labeled(rows), n_classes, percentile, shrinkage);
    save_reference_model(model, out_path);
    std::cout << "wrote " << out_path << " (dim=" << model.dim << ", classes=" << n_classes
              << ", fingerprint=" << model.created_from << ")\n";
    return 0;
}

int run_authenticate(const std::string& model_path, const std::string& submissions_path,
                     const std::string& ref_path, const std::string& out_path,
                     const MetricWeights& weights, const MicroClusterParams& micro,
                     const FlagPolicy& policy, uint64_t seed, int round, int threads) {
    ReferenceModel model = load_reference_model(model_path);

    std::vector<EmbeddingRow> ref_rows = read_embeddings(ref_path);
    if (ref_rows.empty()) throw EmptyInput("no data rows in " + ref_path);
    check_dim(ref_rows, model.dim, "reference embeddings");

    std::vector<EmbeddingRow> sub_rows = read_embeddings(submissions_path);
    if (sub_rows.empty()) throw EmptySubmission("no data rows in " + submissions_path);
    check_dim(sub_rows, model.dim, "submissions");

    AuthServer server;
    server.model = std::move(model);
    server.ref_data = group_reference_by_class(to_labeled(ref_rows));
    server.weights = weights;
    server.micro = micro;
    server.policy = policy;
    server.seed = seed;

    AuthServer::RoundResult result =
        server.authenticate_round(group_submissions(sub_rows), round, threads);
    write_verdict_report(std::cout, round, result.verdicts, result.reports);
    if (!out_path.empty()) write_verdict_report(out_path, round, result.verdicts, result.reports);
    return 0;
}

struct CellOutcome {
    std::string scenario;
    double final_accuracy = 0.0;
};

int run_simulate(ExperimentConfig cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    save_experiment_config(cfg, out_dir + "/config_used.json");

    // scenario x rule grid; the attack and the filter vary, the world seed
    // does not, so accuracies are comparable across cells
    struct Scenario {
        const char* name;
        bool attack;
        bool auth;
    };
    const Scenario scenarios[] = {
        {"clean", false, false}, {"poisoned", true, false}, {"filtered", true, true}};

    std::vector<std::vector<CellOutcome>> table(cfg.rules.size());
    bool scatter_written = false;
    for (size_t ri = 0; ri < cfg.rules.size(); ++ri) {
        const AggregationRule& rule = cfg.rules[ri];
        for (const Scenario& sc : scenarios) {
            std::string cell_dir = out_dir + "/" + cell_dir_name(rule, sc.name);
            fs::create_directories(cell_dir);
            EventLog events(cell_dir + "/events.jsonl");
            SimSinks sinks;
            sinks.event = [&](const std::string& type,
                              const std::map<std::string, std::string>& fields) {
                events.write(type, fields);
            };
            sinks.verdict_file = [&](int round, const std::vector<Verdict>& verdicts,
                                     const std::vector<AnomalyReport>& reports) {
                char name[48];
                std::snprintf(name, sizeof name, "/verdicts_round_%03d.csv", round);
                write_verdict_report(cell_dir + name, round, verdicts, reports);
            };

            SimConfig sim = to_sim_config(cfg, sc.attack, sc.auth);
            SimResult result = run_simulation(sim, rule, &sinks);

            double final_accuracy = result.records.back().accuracy;
            table[ri].push_back({sc.name, final_accuracy});
            std::cout << cell_dir_name(rule, sc.name) << ": accuracy "
                      << format_double(final_accuracy) << "\n";

            if (sc.auth && !scatter_written && !result.first_reports.empty()) {
                write_scatter_csv(out_dir + "/scatter.csv", result.first_reports,
                                  result.poisoned_ids);
                scatter_written = true;
            }
        }
    }

    std::ofstream summary(out_dir + "/summary.csv");
    if (!summary) throw IoError("cannot write " + out_dir + "/summary.csv");
    summary << "rule,clean,poisoned,filtered\n";
    for (size_t ri = 0; ri < cfg.rules.size(); ++ri) {
        summary << cfg.rules[ri].name();
        for (const CellOutcome& cell : table[ri]) summary << "," << format_double(cell.final_accuracy);
        summary << "\n";
    }
    if (!summary) throw IoError("write failed for " + out_dir + "/summary.csv");

    std::cout << "\n";
    std::printf("%-20s %10s %10s %10s\n", "rule", "clean", "poisoned", "filtered");
    for (size_t ri = 0; ri < cfg.rules.size(); ++ri) {
        std::printf("%-20s", cfg.rules[ri].name().c_str());
        for (const CellOutcome& cell : table[ri]) std::printf(" %9.2f%%", 100.0 * cell.final_accuracy);
        std::printf("\n");
    }
    std::cout << "\nreports under " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic federated-learning simulator with client authentication"};
    app.require_subcommand(1);

    // genref
    auto* genref = app.add_subcommand("genref", "build a reference model from clean embeddings");
    std::string gr_embeddings, gr_out;
    int gr_classes = 2;
    double gr_percentile = 99.0, gr_shrinkage = 0.05;
    genref->add_option("--embeddings", gr_embeddings, "clean embedding file")->required();
    genref->add_option("--out", gr_out, "reference model output path")->required();
    genref->add_option("--n-classes", gr_classes, "declared class count");
    genref->add_option("--percentile", gr_percentile, "threshold percentile q");
    genref->add_option("--shrinkage", gr_shrinkage, "covariance shrinkage lambda");

    // authenticate
    auto* auth = app.add_subcommand("authenticate", "score submissions against a reference model");
    std::string au_model, au_subs, au_ref, au_out, au_policy = "largest_gap", au_weights;
    uint64_t au_seed = 0;
    int au_round = 0, au_threads = 1;
    MicroClusterParams au_micro;
    auth->add_option("--model", au_model, "reference model file")->required();
    auth->add_option("--submissions", au_subs, "client submission embedding file")->required();
    auth->add_option("--ref-embeddings", au_ref, "raw reference embedding file (micro-cluster pool)")
        ->required();
    auth->add_option("--out", au_out, "also write the report here");
    auth->add_option("--weights", au_weights, "metric weights wF,wM,wC,p");
    auth->add_option("--policy", au_policy, "largest_gap | top_k:<k> | fixed_threshold:<theta>");
    auth->add_option("--purity-min", au_micro.purity_min, "micro-cluster purity floor");
    auth->add_option("--centroid-factor", au_micro.centroid_factor, "centroid distance factor");
    auth->add_option("--compact-ratio", au_micro.compact_ratio, "compactness ratio ceiling");
    auth->add_option("--restarts", au_micro.restarts, "2-means restarts");
    auth->add_option("--seed", au_seed, "clustering seed");
    auth->add_option("--round", au_round, "round index stamped into the report");
    auth->add_option("--threads", au_threads, "worker threads");

    // simulate
    auto* sim = app.add_subcommand("simulate", "run the full experiment grid");
    std::string sm_config, sm_out_dir = "out", sm_policy, sm_rule, sm_weights;
    std::optional<uint64_t> sm_seed;
    std::optional<double> sm_fraction;
    std::optional<int> sm_threads, sm_rounds;
    sim->add_option("--config", sm_config, "experiment config file (defaults apply if omitted)");
    sim->add_option("--seed", sm_seed, "override world seed");
    sim->add_option("--out-dir", sm_out_dir, "report directory");
    sim->add_option("--policy", sm_policy, "override flag policy");
    sim->add_option("--rule", sm_rule, "run only this aggregation rule");
    sim->add_option("--poison-fraction", sm_fraction, "override poison density");
    sim->add_option("--weights", sm_weights, "override metric weights wF,wM,wC,p");
    sim->add_option("--threads", sm_threads, "override worker threads");
    sim->add_option("--rounds", sm_rounds, "override round count");

    try {
        app.parse(argc, argv);

        if (genref->parsed())
            return run_genref(gr_embeddings, gr_out, gr_classes, gr_percentile, gr_shrinkage);

        if (auth->parsed()) {
            MetricWeights weights;
            if (!au_weights.empty()) weights = parse_weights(au_weights);
            return run_authenticate(au_model, au_subs, au_ref, au_out, weights, au_micro,
                                    FlagPolicy::parse(au_policy), au_seed, au_round, au_threads);
        }

        // simulate: flag > file > default
        ExperimentConfig cfg =
            sm_config.empty() ? default_experiment_config() : load_experiment_config(sm_config);
        if (sm_seed) cfg.world.seed = *sm_seed;
        if (!sm_policy.empty()) cfg.policy = FlagPolicy::parse(sm_policy);
        if (!sm_rule.empty()) cfg.rules = {AggregationRule::parse(sm_rule)};
        if (sm_fraction) cfg.poison_fraction = *sm_fraction;
        if (!sm_weights.empty()) cfg.weights = parse_weights(sm_weights);
        if (sm_threads) cfg.threads = *sm_threads;
        if (sm_rounds) cfg.rounds = *sm_rounds;
        return run_simulate(std::move(cfg), sm_out_dir);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.get_name() << ": " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        // what() already carries the "<kind>: <detail>" form
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << "\n";
        return 1;
    }
}
