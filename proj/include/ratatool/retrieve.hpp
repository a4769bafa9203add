#pragma once

// Exact inner-product retrieval over a tool index: scoring, argmax selection
// and rank-of-target queries.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ratatool/corpus.hpp"
#include "ratatool/embed.hpp"
#include "ratatool/tooldesc.hpp"

namespace ratatool {

struct IndexProvenance {
    std::string corpus_id;
    DescriptionFormat format = DescriptionFormat::Json;
    std::string provider_id;
    std::string model_id;

    bool operator==(const IndexProvenance&) const = default;
};

/// Immutable embedding matrix over a tool corpus, stored row-major.
class ToolIndex {
public:
    /// Throws EmptyCorpus, DimensionMismatch, or DataError on duplicate ids.
    ToolIndex(IndexProvenance provenance, std::vector<std::string> tool_ids,
              std::vector<std::vector<double>> rows);

    std::size_t size() const { return tool_ids_.size(); }
    std::size_t dim() const { return dim_; }
    const IndexProvenance& provenance() const { return provenance_; }
    const std::vector<std::string>& tool_ids() const { return tool_ids_; }
    std::span<const double> row(std::size_t i) const { return {matrix_.data() + i * dim_, dim_}; }

    /// Position of tool_id in entry order; throws UnknownTool.
    std::size_t position(const std::string& tool_id) const;
    bool contains(const std::string& tool_id) const;

    /// Inner product of `query` with every row, in entry order.
    std::vector<double> scores(std::span<const double> query) const;

    /// Versioned JSONL: a header line, then one {tool_id, values} per entry.
    void save(const std::filesystem::path& path) const;
    static ToolIndex load(const std::filesystem::path& path);

private:
    IndexProvenance provenance_;
    std::vector<std::string> tool_ids_;
    std::size_t dim_ = 0;
    std::vector<double> matrix_;
};

/// Embeds canonical_text(tool, format) for every tool in the corpus.
ToolIndex build_index(const ToolCorpus& corpus, EmbeddingProvider& provider, DescriptionFormat format);

/// Refuses an index built by a different provider/model or description format.
void check_provenance(const ToolIndex& index, const EmbeddingProvider& provider,
                      DescriptionFormat format);

/// Sum of a[i] * b[i]; throws DimensionMismatch.
double similarity(std::span<const double> a, std::span<const double> b);
double similarity(const EmbeddingVector& a, const EmbeddingVector& b);

struct ScoredTool {
    std::string tool_id;
    double score = 0.0;

    bool operator==(const ScoredTool&) const = default;
};

struct RetrievalResult {
    /// Descending score; equal scores ordered by ascending tool_id.
    std::vector<ScoredTool> ranking;

    const std::string& selected() const { return ranking.front().tool_id; }
};

/// Full (k = 0) or top-k ranking of the index against a query vector.
RetrievalResult rank_vector(std::span<const double> query, const ToolIndex& index, std::size_t k = 0);

/// 1-based rank of target under the same ordering as rank_vector.
std::size_t rank_of_vector(std::span<const double> query, const ToolIndex& index, const std::string& target);

RetrievalResult select_tool(const TaskDescription& task, const ToolIndex& index, EmbeddingProvider& provider,
                            std::size_t k = 0);

std::size_t rank_of(const TaskDescription& task, const ToolIndex& index, EmbeddingProvider& provider,
                    const std::string& target_tool_id);

}  // namespace ratatool
