#include "ratatool/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <tuple>

#include "ratatool/errors.hpp"
#include "ratatool/parallel.hpp"
#include "ratatool/rng.hpp"

namespace ratatool {

using nlohmann::json;

const ToolDescription* ToolCorpus::find(const std::string& tool_id) const {
    for (const auto& t : tools) {
        if (t.tool_id == tool_id) return &t;
    }
    return nullptr;
}

void validate_corpus(const ToolCorpus& corpus) {
    std::set<std::string> ids;
    for (const auto& t : corpus.tools) {
        if (t.tool_id.empty()) throw SchemaError("tool_id", "empty field");
        validate_fields(to_json(t.fields));
        if (!ids.insert(t.tool_id).second) throw SchemaError("tool_id", "duplicate tool_id " + t.tool_id + " for");
    }
}

void validate_queries(const QuerySet& queries) {
    std::set<std::string> ids;
    for (const auto& q : queries.queries) {
        validate_query(q);
        if (!ids.insert(q.query_id).second) {
            throw SchemaError("query_id", "duplicate query_id " + q.query_id + " for");
        }
    }
}

json CleanReport::to_json() const {
    json rows = json::array();
    for (const auto& r : removals) {
        json row = {{"kind", r.kind == CleanRemoval::Kind::Tool ? "tool" : "query"},
                    {"id", r.id},
                    {"reason", r.reason}};
        if (!r.kept_id.empty()) row["kept_id"] = r.kept_id;
        rows.push_back(std::move(row));
    }
    return {{"removals", rows},
            {"duplicate_tools", duplicate_tools},
            {"remapped_queries", remapped_queries},
            {"dangling_queries", dangling_queries},
            {"duplicate_queries", duplicate_queries}};
}

CleanResult clean(const ToolCorpus& tools, const QuerySet& queries) {
    CleanResult result;
    result.corpus.corpus_id = tools.corpus_id;
    result.queries.set_id = queries.set_id;
    auto& report = result.report;

    // canonical text -> smallest tool_id carrying it
    std::map<std::string, std::string> survivor_by_text;
    for (const auto& t : tools.tools) {
        auto text = canonical_text(t, DescriptionFormat::Json);
        auto [it, inserted] = survivor_by_text.emplace(text, t.tool_id);
        if (!inserted && t.tool_id < it->second) it->second = t.tool_id;
    }

    std::map<std::string, std::string> remap;  // removed tool -> survivor
    for (const auto& t : tools.tools) {
        const auto& survivor = survivor_by_text.at(canonical_text(t, DescriptionFormat::Json));
        if (survivor == t.tool_id) {
            result.corpus.tools.push_back(t);
        } else {
            remap[t.tool_id] = survivor;
            report.removals.push_back({CleanRemoval::Kind::Tool, t.tool_id, "duplicate tool", survivor});
            ++report.duplicate_tools;
        }
    }

    std::set<std::string> known;
    for (const auto& t : result.corpus.tools) known.insert(t.tool_id);

    std::vector<Query> kept;
    for (auto q : queries.queries) {
        if (q.gt_tool_id) {
            if (auto it = remap.find(*q.gt_tool_id); it != remap.end()) {
                report.removals.push_back({CleanRemoval::Kind::Query, q.query_id, "remapped gt_tool_id", it->second});
                ++report.remapped_queries;
                q.gt_tool_id = it->second;
            }
            if (!known.count(*q.gt_tool_id)) {
                report.removals.push_back({CleanRemoval::Kind::Query, q.query_id, "dangling gt_tool_id", ""});
                ++report.dangling_queries;
                continue;
            }
        }
        kept.push_back(std::move(q));
    }

    // exact duplicates on (text, attachments, gt_tool_id): smallest query_id survives
    using Key = std::tuple<std::string, std::string, std::string>;
    auto key_of = [](const Query& q) {
        return Key{q.text, to_json(q)["attachments"].dump(), q.gt_tool_id.value_or("\x1f<none>")};
    };
    std::map<Key, std::string> survivor_query;
    for (const auto& q : kept) {
        auto [it, inserted] = survivor_query.emplace(key_of(q), q.query_id);
        if (!inserted && q.query_id < it->second) it->second = q.query_id;
    }
    for (auto& q : kept) {
        const auto& survivor = survivor_query.at(key_of(q));
        if (survivor == q.query_id) {
            result.queries.queries.push_back(std::move(q));
        } else {
            report.removals.push_back({CleanRemoval::Kind::Query, q.query_id, "duplicate query", survivor});
            ++report.duplicate_queries;
        }
    }
    return result;
}

json SplitAssignment::to_json() const {
    return {{"train_tool_ids", train_tool_ids},
            {"test_tool_ids", test_tool_ids},
            {"ratio", ratio},
            {"seed", seed}};
}

SplitAssignment SplitAssignment::from_json(const json& j) {
    SplitAssignment s;
    try {
        s.train_tool_ids = j.at("train_tool_ids").get<std::set<std::string>>();
        s.test_tool_ids = j.at("test_tool_ids").get<std::set<std::string>>();
        s.ratio = j.at("ratio").get<double>();
        s.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed split assignment: ") + e.what());
    }
    return s;
}

std::size_t train_count(std::size_t n, double ratio) {
    // The epsilon absorbs products like 0.29 * 100 = 28.999999999999996.
    auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
    return std::min(k, n);
}

SplitAssignment split_tools(const ToolCorpus& corpus, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ConfigError("split ratio must lie strictly between 0 and 1");
    }
    SplitAssignment split;
    split.ratio = ratio;
    split.seed = seed;
    Rng rng(seed);
    for (auto m : kAllModalities) {
        std::vector<std::string> ids;
        for (const auto& t : corpus.tools) {
            if (t.modality == m) ids.push_back(t.tool_id);
        }
        if (ids.empty()) continue;
        if (ids.size() < 2) throw EmptyModalityError(std::string(to_string(m)));
        std::sort(ids.begin(), ids.end());
        shuffle(std::span<std::string>(ids), rng);
        auto k = train_count(ids.size(), ratio);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            (i < k ? split.train_tool_ids : split.test_tool_ids).insert(ids[i]);
        }
    }
    return split;
}

QuerySplit split_queries(const QuerySet& queries, const SplitAssignment& split) {
    QuerySplit out;
    out.train.set_id = queries.set_id + ":train";
    out.test.set_id = queries.set_id + ":test";
    for (const auto& q : queries.queries) {
        if (q.gt_tool_id && split.is_train(*q.gt_tool_id)) {
            out.train.queries.push_back(q);
        } else if (q.gt_tool_id && split.is_test(*q.gt_tool_id)) {
            out.test.queries.push_back(q);
        } else {
            out.unassigned.push_back(q.query_id);
        }
    }
    return out;
}

DatasetStats stats(const ToolCorpus& corpus, const QuerySet& queries, const SplitAssignment& split) {
    DatasetStats s;
    auto col = [](Modality m) { return static_cast<std::size_t>(m); };
    for (const auto& t : corpus.tools) {
        std::size_t row = split.is_train(t.tool_id) ? 0 : split.is_test(t.tool_id) ? 1 : 3;
        if (row == 3) throw DataError("tool \"" + t.tool_id + "\" is missing from the split");
        ++s.tools[row][col(t.modality)];
    }
    for (const auto& q : queries.queries) {
        std::size_t row = 3;
        if (q.gt_tool_id) row = split.is_train(*q.gt_tool_id) ? 0 : split.is_test(*q.gt_tool_id) ? 1 : 3;
        if (row == 3) {
            ++s.unassigned_queries;
            continue;
        }
        ++s.queries[row][col(modality_class(q))];
    }
    for (auto* table : {&s.queries, &s.tools}) {
        for (std::size_t c = 0; c < 3; ++c) (*table)[2][c] = (*table)[0][c] + (*table)[1][c];
        for (auto& row : *table) row[3] = row[0] + row[1] + row[2];
    }
    return s;
}

json DatasetStats::to_json() const {
    static const char* rows[] = {"train", "test", "overall"};
    static const char* cols[] = {"text", "image", "audio", "all"};
    json j = json::object();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            j["unique_queries"][rows[r]][cols[c]] = queries[r][c];
            j["unique_tools"][rows[r]][cols[c]] = tools[r][c];
        }
    }
    j["unassigned_queries"] = unassigned_queries;
    return j;
}

namespace {

std::string with_commas(std::size_t v) {
    auto digits = std::to_string(v);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return out;
}

}  // namespace

std::string DatasetStats::render_table() const {
    static const char* rows[] = {"Training split", "Test split", "Overall"};
    std::ostringstream os;
    os << std::left << std::setw(16) << "" << std::right;
    os << "| " << std::setw(8) << "Unique Queries" << std::setw(32) << "";
    os << "| Unique Tools\n";
    os << std::left << std::setw(16) << "" << std::right;
    for (int half = 0; half < 2; ++half) {
        os << "| ";
        for (const char* c : {"Text", "Image", "Audio", "All"}) os << std::setw(10) << c;
        os << "  ";
    }
    os << '\n';
    for (int r = 0; r < 3; ++r) {
        os << std::left << std::setw(16) << rows[r] << std::right;
        for (const auto* table : {&queries, &tools}) {
            os << "| ";
            for (int c = 0; c < 4; ++c) os << std::setw(10) << with_commas((*table)[r][c]);
            os << "  ";
        }
        os << '\n';
    }
    return os.str();
}

std::string model_card_url(const std::string& base, const std::string& repo_id) {
    auto b = base;
    while (!b.empty() && b.back() == '/') b.pop_back();
    return b + "/" + repo_id + "/raw/main/README.md";
}

std::string fetch_model_card(const std::string& repo_id, const std::string& base_url,
                             const FetchOptions& options) {
    auto url = model_card_url(base_url, repo_id);
    std::string body;
    int last_status = 0;
    bool ok = http::with_retry(options.retry, [&] {
        auto res = http::get(url);
        last_status = res.status;
        if (res.status == 200) {
            body = std::move(res.body);
            return true;
        }
        if (res.status == 404) throw NotFound(repo_id);
        if (http::is_transient(res.status)) return false;
        throw NetworkError("GET " + url + " returned status " + std::to_string(res.status));
    });
    if (!ok) {
        throw NetworkError("GET " + url + " failed after " + std::to_string(options.retry.attempts) +
                           " attempts (last status " + std::to_string(last_status) + ")");
    }
    return body;
}

std::vector<std::string> fetch_model_cards(const std::vector<std::string>& repo_ids,
                                           const std::string& base_url, const FetchOptions& options) {
    std::vector<std::string> cards(repo_ids.size());
    parallel_for(repo_ids.size(), options.parallelism,
                 [&](std::size_t i) { cards[i] = fetch_model_card(repo_ids[i], base_url, options); });
    return cards;
}

}  // namespace ratatool
