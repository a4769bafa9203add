#include "ratatool/eval.hpp"

#include <cstdio>
#include <sstream>

#include "ratatool/errors.hpp"
#include "ratatool/parallel.hpp"

namespace ratatool {

using nlohmann::json;

json EvalItem::to_json() const {
    return {{"query_id", query_id},
            {"modality", to_string(modality)},
            {"gt_tool_id", gt_tool_id},
            {"selected_tool_id", selected_tool_id},
            {"correct", correct},
            {"rank_of_gt", rank_of_gt},
            {"generation_failed", generation_failed}};
}

EvalItem EvalItem::from_json(const json& j) {
    EvalItem it;
    try {
        it.query_id = j.at("query_id").get<std::string>();
        it.modality = parse_modality(j.at("modality").get<std::string>());
        it.gt_tool_id = j.at("gt_tool_id").get<std::string>();
        it.selected_tool_id = j.at("selected_tool_id").get<std::string>();
        it.correct = j.at("correct").get<bool>();
        it.rank_of_gt = j.at("rank_of_gt").get<std::size_t>();
        it.generation_failed = j.value("generation_failed", false);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed eval item: ") + e.what());
    }
    return it;
}

Aggregates combine_modalities(std::span<const ModalityCell> cells) {
    double weighted = 0.0, macro = 0.0;
    std::size_t total = 0, present = 0;
    for (const auto& c : cells) {
        if (c.count == 0) continue;
        weighted += c.accuracy * static_cast<double>(c.count);
        macro += c.accuracy;
        total += c.count;
        ++present;
    }
    if (present == 0) throw EmptyEval();
    return {weighted / static_cast<double>(total), macro / static_cast<double>(present)};
}

double recall_at_k(std::span<const EvalItem> items, std::size_t k) {
    if (items.empty()) throw EmptyEval();
    if (k == 0) throw ConfigError("recall cutoff k must be at least 1");
    std::size_t hit = 0;
    for (const auto& it : items) {
        if (!it.generation_failed && it.rank_of_gt >= 1 && it.rank_of_gt <= k) ++hit;
    }
    return 100.0 * static_cast<double>(hit) / static_cast<double>(items.size());
}

EvalReport aggregate(std::span<const EvalItem> items) {
    if (items.empty()) throw EmptyEval();
    EvalReport r;
    std::array<std::size_t, 3> count{};
    std::array<std::vector<EvalItem>, 3> by_modality;
    for (const auto& it : items) {
        auto m = static_cast<std::size_t>(it.modality);
        ++count[m];
        if (it.correct) ++r.correct[m];
        if (it.generation_failed) ++r.generation_failures;
        by_modality[m].push_back(it);
    }
    r.total = items.size();
    std::vector<ModalityCell> cells;
    for (auto mod : kAllModalities) {
        auto m = static_cast<std::size_t>(mod);
        r.total_correct += r.correct[m];
        if (count[m] == 0) continue;
        ModalityCell cell{mod, 100.0 * static_cast<double>(r.correct[m]) / static_cast<double>(count[m]), count[m]};
        r.per_modality[m] = cell;
        cells.push_back(cell);
        for (auto k : kRecallCutoffs) r.recall_at_k_by_modality[m][k] = recall_at_k(by_modality[m], k);
    }
    // Micro mean straight from counts; equal to the weighted cell mean.
    r.avg_q = 100.0 * static_cast<double>(r.total_correct) / static_cast<double>(r.total);
    r.avg_m = combine_modalities(cells).avg_m;
    for (auto k : kRecallCutoffs) r.recall_at_k[k] = recall_at_k(items, k);
    return r;
}

json EvalReport::to_json() const {
    json j = json::object();
    json mods = json::object();
    for (auto mod : kAllModalities) {
        auto m = static_cast<std::size_t>(mod);
        if (!per_modality[m]) continue;
        json rk = json::object();
        for (const auto& [k, v] : recall_at_k_by_modality[m]) rk[std::to_string(k)] = v;
        mods[std::string(to_string(mod))] = {{"accuracy", per_modality[m]->accuracy},
                                              {"count", per_modality[m]->count},
                                              {"correct", correct[m]},
                                              {"recall_at_k", rk}};
    }
    j["modalities"] = mods;
    j["avg_q"] = avg_q;
    j["avg_m"] = avg_m;
    j["total"] = total;
    j["total_correct"] = total_correct;
    j["generation_failures"] = generation_failures;
    json rk = json::object();
    for (const auto& [k, v] : recall_at_k) rk[std::to_string(k)] = v;
    j["recall_at_k"] = rk;
    return j;
}

std::string EvalReport::render_table(const std::string& label) const {
    auto cell = [](std::optional<double> v) {
        char buf[32];
        if (!v) return std::string("-");
        std::snprintf(buf, sizeof buf, "%.1f", *v);
        return std::string(buf);
    };
    auto pad = [](const std::string& s, std::size_t w) {
        return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
    };
    std::ostringstream os;
    std::size_t lw = std::max<std::size_t>(label.size(), 5);
    os << std::string(lw, ' ');
    for (const char* h : {"Text", "Image", "Audio", "Avg_q", "Avg_m"}) os << pad(h, 8);
    os << '\n' << label << std::string(lw - label.size(), ' ');
    for (auto mod : kAllModalities) {
        const auto& c = per_modality[static_cast<std::size_t>(mod)];
        os << pad(cell(c ? std::optional<double>(c->accuracy) : std::nullopt), 8);
    }
    os << pad(cell(avg_q), 8) << pad(cell(avg_m), 8) << '\n';
    return os.str();
}

EvalResult evaluate(std::span<const Query> queries, TaskGenerator& generator, const ToolIndex& index,
                    EmbeddingProvider& provider, std::size_t parallelism) {
    if (queries.empty()) throw EmptyEval();
    for (const auto& q : queries) {
        if (!q.gt_tool_id) throw UnknownTool("<none> (query " + q.query_id + ")");
        index.position(*q.gt_tool_id);
    }
    EvalResult result;
    result.items.resize(queries.size());
    parallel_for(queries.size(), parallelism, [&](std::size_t i) {
        const auto& q = queries[i];
        EvalItem item;
        item.query_id = q.query_id;
        item.modality = modality_class(q);
        item.gt_tool_id = *q.gt_tool_id;
        std::optional<TaskDescription> task;
        try {
            auto rec = generator.generate(q);
            task = rec.parsed;
        } catch (const GenerationError&) {
            task.reset();
        }
        if (!task) {
            item.generation_failed = true;
            item.rank_of_gt = index.size() + 1;
        } else {
            auto res = select_tool(*task, index, provider);
            item.selected_tool_id = res.selected();
            for (std::size_t r = 0; r < res.ranking.size(); ++r) {
                if (res.ranking[r].tool_id == item.gt_tool_id) {
                    item.rank_of_gt = r + 1;
                    break;
                }
            }
            item.correct = item.selected_tool_id == item.gt_tool_id;
        }
        result.items[i] = std::move(item);
    });
    result.report = aggregate(result.items);
    return result;
}

}  // namespace ratatool
