#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fedauth/anomaly_metrics.hpp"

namespace fedauth {

enum class Status { Authentic, Suspicious };

inline const char* status_name(Status s) {
    return s == Status::Authentic ? "authentic" : "suspicious";
}

struct Verdict {
    std::string client_id;
    Status status = Status::Authentic;
    double score = 0.0;
    int rank = 0;  // 1-based, descending score, ties by ascending client_id
};

// Simulation token licensing a client to submit an update this round. Not a
// signature; the nonce only has to be unique and reproducible per seed.
struct VerificationTag {
    std::string client_id;
    int round = 0;
    std::array<uint64_t, 2> nonce = {0, 0};
    bool valid = true;
};

std::string nonce_hex(const std::array<uint64_t, 2>& nonce);

struct FlagPolicy {
    enum class Mode { FixedThreshold, LargestGap, TopK };
    Mode mode = Mode::LargestGap;
    double threshold = 0.0;  // FixedThreshold: suspicious iff S > threshold
    int k = 0;               // TopK: the k highest scores are suspicious

    static FlagPolicy fixed_threshold(double theta);
    static FlagPolicy largest_gap();
    static FlagPolicy top_k(int k);
    static FlagPolicy parse(const std::string& spec);  // "largest_gap" | "top_k:5" | "fixed_threshold:0.5"
    std::string name() const;

    // The gap cut only fires when the best consecutive gap exceeds this
    // fraction of the maximum score; otherwise nobody is flagged.
    static constexpr double kGapFloor = 0.10;
};

// Stable descending sort by suspicion score, ties by ascending client_id.
// Statuses default to Authentic; decide_verdicts assigns the real ones.
std::vector<Verdict> rank_clients(const std::vector<AnomalyReport>& reports);

std::vector<Verdict> decide_verdicts(std::vector<Verdict> ranked, const FlagPolicy& policy);

// One tag per Authentic verdict. Nonces derive from (seed, round, client),
// so reissuing for the same round reproduces them.
std::vector<VerificationTag> issue_tags(const std::vector<Verdict>& verdicts, int round,
                                        uint64_t seed);

// The independent authentication actor: owns the golden baseline and turns a
// round of submissions into ranked verdicts plus tags. It never sees model
// parameters or raw data.
struct AuthServer {
    ReferenceModel model;
    ClassDataMap ref_data;
    MetricWeights weights;
    MicroClusterParams micro;
    FlagPolicy policy;
    uint64_t seed = 0;

    struct RoundResult {
        std::vector<AnomalyReport> reports;  // ascending client_id
        std::vector<Verdict> verdicts;       // descending score
        std::vector<VerificationTag> tags;
    };

    // Per-client evaluation may fan out over `threads`; reports are merged
    // in ascending client_id order so the result is thread-count
    // independent.
    RoundResult authenticate_round(const std::vector<ClientSubmission>& submissions, int round,
                                   int threads = 1) const;
};

}  // namespace fedauth
