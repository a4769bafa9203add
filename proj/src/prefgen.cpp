#include "ratatool/prefgen.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "ratatool/errors.hpp"
#include "ratatool/parallel.hpp"

namespace ratatool {

using nlohmann::json;

void CandidateSet::validate() const {
    std::set<DecodingStrategy> seen;
    for (const auto& c : candidates) {
        if (c.query_id != query_id) {
            throw DataError("candidate for \"" + c.query_id + "\" placed in set for \"" + query_id + "\"");
        }
        if (!seen.insert(c.strategy).second) {
            throw DataError("query \"" + query_id + "\" repeats strategy " + std::string(to_string(c.strategy)));
        }
    }
}

RankedCandidates rank_candidates(const CandidateSet& set, const ToolIndex& index, EmbeddingProvider& provider) {
    set.validate();
    index.position(set.gt_tool_id);
    RankedCandidates out;
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < set.candidates.size(); ++i) {
        const auto& c = set.candidates[i];
        if (!c.parsed) {
            ++out.unparsed;
            continue;
        }
        out.ranked.push_back({i, 0});
        texts.push_back(canonical_text(*c.parsed));
    }
    if (out.ranked.size() < 2) throw TooFewCandidates(set.query_id, out.ranked.size());
    auto vecs = provider.embed(texts);
    for (std::size_t k = 0; k < vecs.size(); ++k) {
        out.ranked[k].rank = rank_of_vector(vecs[k].values, index, set.gt_tool_id);
    }
    return out;
}

json PreferencePair::to_json() const {
    return {{"query_id", query_id},
            {"chosen", ratatool::to_json(chosen.fields)},
            {"rejected", ratatool::to_json(rejected.fields)},
            {"chosen_rank", chosen_rank},
            {"rejected_rank", rejected_rank},
            {"chosen_strategy", to_string(chosen_strategy)},
            {"rejected_strategy", to_string(rejected_strategy)}};
}

std::variant<PreferencePair, Discard> build_pair(const CandidateSet& set, const RankedCandidates& ranks, Rng& rng) {
    const auto& r = ranks.ranked;
    if (r.size() < 2) return Discard{Discard::Reason::ParseFailures};
    std::size_t best = 0;
    bool all_equal = true;
    for (std::size_t i = 1; i < r.size(); ++i) {
        all_equal = all_equal && r[i].rank == r[0].rank;
        if (r[i].rank < r[best].rank) best = i;
    }
    if (all_equal) return Discard{Discard::Reason::AllEqual};

    auto pick = uniform_index(rng, r.size() - 1);
    auto loser = pick < best ? pick : pick + 1;

    const auto& w = set.candidates.at(r[best].candidate);
    const auto& l = set.candidates.at(r[loser].candidate);
    PreferencePair p;
    p.query_id = set.query_id;
    p.chosen = *w.parsed;
    p.rejected = *l.parsed;
    p.chosen_rank = r[best].rank;
    p.rejected_rank = r[loser].rank;
    p.chosen_strategy = w.strategy;
    p.rejected_strategy = l.strategy;
    return p;
}

std::variant<PreferencePair, Discard> build_pair(const CandidateSet& set, const RankedCandidates& ranks,
                                                 std::uint64_t seed) {
    Rng rng(seed);
    return build_pair(set, ranks, rng);
}

json PrefBuildReport::to_json() const {
    return {{"input_sets", input_sets},
            {"pairs_emitted", pairs_emitted},
            {"sets_discarded_all_equal", sets_discarded_all_equal},
            {"sets_discarded_parse_failures", sets_discarded_parse_failures},
            {"train_pairs", train_pairs},
            {"eval_pairs", eval_pairs},
            {"wins_by_strategy", wins_by_strategy}};
}

std::size_t eval_count(std::size_t pairs, double eval_fraction) {
    if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) {
        throw ConfigError("eval_fraction must lie in [0, 1)");
    }
    auto k = static_cast<std::size_t>(std::floor(eval_fraction * static_cast<double>(pairs) + 1e-9));
    return std::min(k, pairs);
}

PreferenceDataset build_dataset(std::span<const CandidateSet> sets, const ToolIndex& index,
                                EmbeddingProvider& provider, std::uint64_t seed, double eval_fraction,
                                std::size_t parallelism) {
    eval_count(0, eval_fraction);

    // Ranking may run in parallel; pair construction consumes the PRNG in set order.
    std::vector<std::optional<RankedCandidates>> ranked(sets.size());
    parallel_for(sets.size(), parallelism, [&](std::size_t i) {
        try {
            ranked[i] = rank_candidates(sets[i], index, provider);
        } catch (const TooFewCandidates&) {
            ranked[i].reset();
        }
    });

    PreferenceDataset ds;
    auto& rep = ds.report;
    rep.input_sets = sets.size();
    Rng rng(seed);
    std::vector<PreferencePair> pairs;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        if (!ranked[i]) {
            ++rep.sets_discarded_parse_failures;
            continue;
        }
        auto result = build_pair(sets[i], *ranked[i], rng);
        if (auto* d = std::get_if<Discard>(&result)) {
            if (d->reason == Discard::Reason::AllEqual) {
                ++rep.sets_discarded_all_equal;
            } else {
                ++rep.sets_discarded_parse_failures;
            }
            continue;
        }
        auto& p = std::get<PreferencePair>(result);
        ++rep.wins_by_strategy[std::string(to_string(p.chosen_strategy))];
        pairs.push_back(std::move(p));
    }
    rep.pairs_emitted = pairs.size();

    shuffle(std::span(pairs), rng);
    auto n_eval = eval_count(pairs.size(), eval_fraction);
    auto n_train = pairs.size() - n_eval;
    ds.train.assign(std::make_move_iterator(pairs.begin()),
                    std::make_move_iterator(pairs.begin() + static_cast<std::ptrdiff_t>(n_train)));
    ds.eval.assign(std::make_move_iterator(pairs.begin() + static_cast<std::ptrdiff_t>(n_train)),
                   std::make_move_iterator(pairs.end()));
    rep.train_pairs = ds.train.size();
    rep.eval_pairs = ds.eval.size();
    return ds;
}

std::vector<CandidateSet> group_candidates(std::span<const GenerationRecord> records, std::span<const Query> queries) {
    std::unordered_map<std::string, const Query*> by_id;
    for (const auto& q : queries) by_id[q.query_id] = &q;
    std::vector<CandidateSet> sets;
    std::unordered_map<std::string, std::size_t> slot;
    for (const auto& r : records) {
        auto q = by_id.find(r.query_id);
        if (q == by_id.end()) throw DataError("generation record for unknown query \"" + r.query_id + "\"");
        if (!q->second->gt_tool_id) continue;
        auto [it, inserted] = slot.emplace(r.query_id, sets.size());
        if (inserted) sets.push_back({r.query_id, *q->second->gt_tool_id, {}});
        sets[it->second].candidates.push_back(r);
    }
    return sets;
}

}  // namespace ratatool
