#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "fedauth/anomaly_metrics.hpp"
#include "fedauth/auth_server.hpp"

namespace fedauth {

// Shortest decimal form that round-trips to the same double.
std::string format_double(double value);

// Embedding files: one row per sample, header "client_id,label,x0,..".
// The header's column count declares the dimension.
struct EmbeddingRow {
    std::string client_id;
    int label = 0;
    Vec vector;
};

std::vector<EmbeddingRow> read_embeddings(const std::string& path);
void write_embeddings(const std::string& path, const std::vector<EmbeddingRow>& rows);

std::vector<LabeledEmbedding> to_labeled(const std::vector<EmbeddingRow>& rows);

// Groups rows into per-client submissions, ascending client_id; row order
// within a client is preserved.
std::vector<ClientSubmission> group_submissions(const std::vector<EmbeddingRow>& rows);

// Fixed columns: round,client_id,F,M,C,S,rank,status. Rows ascend by rank.
void write_verdict_report(std::ostream& out, int round, const std::vector<Verdict>& verdicts,
                          const std::vector<AnomalyReport>& reports);
void write_verdict_report(const std::string& path, int round, const std::vector<Verdict>& verdicts,
                          const std::vector<AnomalyReport>& reports);

// Scatter data: client_id,S,is_poisoned with rows ascending by client_id.
void write_scatter_csv(const std::string& path, const std::vector<AnomalyReport>& reports,
                       const std::vector<std::string>& poisoned_ids);

// Line-delimited event stream; each line is one object with "type" first.
class EventLog {
  public:
    explicit EventLog(const std::string& path);

    void write(const std::string& type, const std::map<std::string, std::string>& fields);

  private:
    std::ofstream out_;
};

}  // namespace fedauth
