#pragma once

// Preference-pair construction: candidates are ranked by where they place the
// ground-truth tool; the best one is chosen, the rejected one drawn uniformly
// from the rest.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ratatool/llmclient.hpp"
#include "ratatool/retrieve.hpp"
#include "ratatool/rng.hpp"

namespace ratatool {

struct CandidateSet {
    std::string query_id;
    std::string gt_tool_id;
    std::vector<GenerationRecord> candidates;

    /// Throws DataError on repeated strategies or foreign query ids.
    void validate() const;
};

struct RankedCandidate {
    std::size_t candidate = 0;  // index into CandidateSet::candidates
    std::size_t rank = 0;
};

struct RankedCandidates {
    std::vector<RankedCandidate> ranked;  // parsed candidates, in candidate order
    std::size_t unparsed = 0;
};

/// Throws UnknownTool, or TooFewCandidates when fewer than 2 parsed remain.
RankedCandidates rank_candidates(const CandidateSet& set, const ToolIndex& index, EmbeddingProvider& provider);

struct PreferencePair {
    std::string query_id;
    TaskDescription chosen;
    TaskDescription rejected;
    std::size_t chosen_rank = 0;
    std::size_t rejected_rank = 0;
    DecodingStrategy chosen_strategy = DecodingStrategy::Greedy;
    DecodingStrategy rejected_strategy = DecodingStrategy::Greedy;

    nlohmann::json to_json() const;
};

struct Discard {
    enum class Reason { AllEqual, ParseFailures } reason;
};

/// Chosen = minimum rank (first by candidate index on ties); rejected drawn
/// uniformly from all other ranked candidates. All-equal ranks discard.
std::variant<PreferencePair, Discard> build_pair(const CandidateSet& set, const RankedCandidates& ranks, Rng& rng);
std::variant<PreferencePair, Discard> build_pair(const CandidateSet& set, const RankedCandidates& ranks,
                                                 std::uint64_t seed);

struct PrefBuildReport {
    std::size_t input_sets = 0;
    std::size_t pairs_emitted = 0;
    std::size_t sets_discarded_all_equal = 0;
    std::size_t sets_discarded_parse_failures = 0;
    std::size_t train_pairs = 0;
    std::size_t eval_pairs = 0;
    std::map<std::string, std::size_t> wins_by_strategy;

    nlohmann::json to_json() const;
};

struct PreferenceDataset {
    std::vector<PreferencePair> train;
    std::vector<PreferencePair> eval;
    PrefBuildReport report;
};

/// Eval fraction matching the reported 2,981 / 409 split.
inline constexpr double kDefaultEvalFraction = 409.0 / 3390.0;

std::size_t eval_count(std::size_t pairs, double eval_fraction);

/// Pairs per set, seeded shuffle, last floor(eval_fraction * n) held out.
PreferenceDataset build_dataset(std::span<const CandidateSet> sets, const ToolIndex& index,
                                EmbeddingProvider& provider, std::uint64_t seed,
                                double eval_fraction = kDefaultEvalFraction, std::size_t parallelism = 1);

/// Groups generation records by query_id (first-seen order) with each
/// query's ground-truth tool. Queries without gt_tool_id are skipped.
std::vector<CandidateSet> group_candidates(std::span<const GenerationRecord> records, std::span<const Query> queries);

}  // namespace ratatool
