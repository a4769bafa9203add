#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ratatool/http.hpp"
#include "ratatool/tooldesc.hpp"

namespace ratatool {

struct ToolCorpus {
    std::string corpus_id;
    std::vector<ToolDescription> tools;

    const ToolDescription* find(const std::string& tool_id) const;
};

struct QuerySet {
    std::string set_id;
    std::vector<Query> queries;
};

/// Throws SchemaError on duplicate ids or invalid members.
void validate_corpus(const ToolCorpus& corpus);
void validate_queries(const QuerySet& queries);

struct CleanRemoval {
    enum class Kind { Tool, Query } kind;
    std::string id;
    std::string reason;
    std::string kept_id;  // surviving duplicate / remap target, if any
};

struct CleanReport {
    std::vector<CleanRemoval> removals;
    std::size_t duplicate_tools = 0;
    std::size_t remapped_queries = 0;
    std::size_t dangling_queries = 0;
    std::size_t duplicate_queries = 0;

    bool empty() const { return removals.empty(); }
    nlohmann::json to_json() const;
};

struct CleanResult {
    ToolCorpus corpus;
    QuerySet queries;
    CleanReport report;
};

/// Collapses tools with identical canonical text (smallest tool_id wins,
/// queries are remapped to it), drops queries whose gt_tool_id is unknown,
/// and removes exact-duplicate queries (smallest query_id wins). Idempotent.
CleanResult clean(const ToolCorpus& tools, const QuerySet& queries);

struct SplitAssignment {
    std::set<std::string> train_tool_ids;
    std::set<std::string> test_tool_ids;
    double ratio = 0.9;
    std::uint64_t seed = 0;

    bool is_train(const std::string& tool_id) const { return train_tool_ids.count(tool_id) > 0; }
    bool is_test(const std::string& tool_id) const { return test_tool_ids.count(tool_id) > 0; }

    nlohmann::json to_json() const;
    static SplitAssignment from_json(const nlohmann::json& j);
};

/// Number of tools assigned to train out of n at the given ratio.
std::size_t train_count(std::size_t n, double ratio);

/// Per-modality seeded split at the tool level; see train_count for sizes.
SplitAssignment split_tools(const ToolCorpus& corpus, double ratio, std::uint64_t seed);

struct QuerySplit {
    QuerySet train;
    QuerySet test;
    std::vector<std::string> unassigned;  // queries with no gt_tool_id in the split
};

/// Queries follow their ground-truth tool.
QuerySplit split_queries(const QuerySet& queries, const SplitAssignment& split);

struct DatasetStats {
    // rows: train, test, overall; columns: text, image, audio, all
    using Row = std::array<std::size_t, 4>;
    std::array<Row, 3> queries{};
    std::array<Row, 3> tools{};
    std::size_t unassigned_queries = 0;

    nlohmann::json to_json() const;
    std::string render_table() const;
};

/// Query modality comes from attachments; tool modality from the tool record.
DatasetStats stats(const ToolCorpus& corpus, const QuerySet& queries, const SplitAssignment& split);

struct FetchOptions {
    http::RetryPolicy retry;
    std::size_t parallelism = 4;
};

/// Expands `<base>/<repo_id>/raw/main/README.md`.
std::string model_card_url(const std::string& base, const std::string& repo_id);

/// GETs a model card's raw README. 404 throws NotFound; transient failures are
/// retried with exponential backoff, then NetworkError.
std::string fetch_model_card(const std::string& repo_id, const std::string& base_url,
                             const FetchOptions& options = {});

std::vector<std::string> fetch_model_cards(const std::vector<std::string>& repo_ids,
                                           const std::string& base_url,
                                           const FetchOptions& options = {});

}  // namespace ratatool
