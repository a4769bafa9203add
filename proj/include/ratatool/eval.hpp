#pragma once

// Tool-selection evaluation: per-item scoring and per-modality / aggregate
// accuracy reports.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ratatool/llmclient.hpp"
#include "ratatool/retrieve.hpp"

namespace ratatool {

struct EvalItem {
    std::string query_id;
    Modality modality = Modality::Text;
    std::string gt_tool_id;
    std::string selected_tool_id;  // empty when generation failed
    bool correct = false;
    std::size_t rank_of_gt = 0;
    bool generation_failed = false;

    nlohmann::json to_json() const;
    static EvalItem from_json(const nlohmann::json& j);
};

/// Accuracy of one modality, in percent.
struct ModalityCell {
    Modality modality = Modality::Text;
    double accuracy = 0.0;
    std::size_t count = 0;
};

struct Aggregates {
    double avg_q = 0.0;  // query-weighted (micro) mean
    double avg_m = 0.0;  // unweighted mean over modalities with items
};

/// Combines per-modality accuracies. Cells with count 0 are ignored.
/// Throws EmptyEval when no cell has items.
Aggregates combine_modalities(std::span<const ModalityCell> cells);

inline constexpr std::array<std::size_t, 4> kRecallCutoffs = {1, 3, 5, 10};

struct EvalReport {
    std::array<std::optional<ModalityCell>, 3> per_modality;  // indexed by Modality
    std::array<std::size_t, 3> correct{};
    std::size_t total = 0;
    std::size_t total_correct = 0;
    std::size_t generation_failures = 0;
    double avg_q = 0.0;
    double avg_m = 0.0;
    std::map<std::size_t, double> recall_at_k;  // overall, percent
    std::array<std::map<std::size_t, double>, 3> recall_at_k_by_modality;

    nlohmann::json to_json() const;
    /// Text / Image / Audio / Avg_q / Avg_m at one decimal.
    std::string render_table(const std::string& label = "") const;
};

/// Throws EmptyEval.
EvalReport aggregate(std::span<const EvalItem> items);

/// Percent of items whose ground truth ranks within the top k; failed generations never
/// count. Throws EmptyEval.
double recall_at_k(std::span<const EvalItem> items, std::size_t k);

struct EvalResult {
    std::vector<EvalItem> items;
    EvalReport report;
};

/// Generates, retrieves and scores every query. Generation failures count as
/// incorrect with rank = index size + 1. Throws UnknownTool for ground truths
/// outside the index.
EvalResult evaluate(std::span<const Query> queries, TaskGenerator& generator, const ToolIndex& index,
                    EmbeddingProvider& provider, std::size_t parallelism = 1);

}  // namespace ratatool
