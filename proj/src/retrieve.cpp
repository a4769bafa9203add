#include "ratatool/retrieve.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ratatool/errors.hpp"

namespace ratatool {

using nlohmann::json;

namespace {

constexpr int kIndexFormatVersion = 1;

// Descending score, then ascending tool_id.
bool ranks_before(double sa, const std::string& ia, double sb, const std::string& ib) {
    if (sa != sb) return sa > sb;
    return ia < ib;
}

}  // namespace

ToolIndex::ToolIndex(IndexProvenance provenance, std::vector<std::string> tool_ids,
                     std::vector<std::vector<double>> rows)
    : provenance_(std::move(provenance)), tool_ids_(std::move(tool_ids)) {
    if (tool_ids_.empty()) throw EmptyCorpus();
    if (rows.size() != tool_ids_.size()) throw DataError("index has mismatched id and row counts");
    dim_ = rows.front().size();
    if (dim_ == 0) throw DimensionMismatch(1, 0);
    std::unordered_set<std::string> seen;
    matrix_.reserve(dim_ * rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != dim_) throw DimensionMismatch(dim_, rows[i].size());
        if (!seen.insert(tool_ids_[i]).second) throw DataError("duplicate tool_id \"" + tool_ids_[i] + "\" in index");
        matrix_.insert(matrix_.end(), rows[i].begin(), rows[i].end());
    }
}

std::size_t ToolIndex::position(const std::string& tool_id) const {
    auto it = std::find(tool_ids_.begin(), tool_ids_.end(), tool_id);
    if (it == tool_ids_.end()) throw UnknownTool(tool_id);
    return static_cast<std::size_t>(it - tool_ids_.begin());
}

bool ToolIndex::contains(const std::string& tool_id) const {
    return std::find(tool_ids_.begin(), tool_ids_.end(), tool_id) != tool_ids_.end();
}

std::vector<double> ToolIndex::scores(std::span<const double> query) const {
    if (query.size() != dim_) throw DimensionMismatch(dim_, query.size());
    const std::size_t n = size();
    std::vector<double> out(n);
    const double* q = query.data();
    // Four rows per pass share each query load. Every row still accumulates in
    // dimension order, so results equal a plain sequential dot product.
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const double* r0 = matrix_.data() + i * dim_;
        const double* r1 = r0 + dim_;
        const double* r2 = r1 + dim_;
        const double* r3 = r2 + dim_;
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) {
            const double x = q[d];
            s0 += x * r0[d];
            s1 += x * r1[d];
            s2 += x * r2[d];
            s3 += x * r3[d];
        }
        out[i] = s0;
        out[i + 1] = s1;
        out[i + 2] = s2;
        out[i + 3] = s3;
    }
    for (; i < n; ++i) {
        const double* r = matrix_.data() + i * dim_;
        double s = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) s += q[d] * r[d];
        out[i] = s;
    }
    return out;
}

void ToolIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write index " + path.string());
    json header = {{"kind", "ratatool-tool-index"},
                   {"format_version", kIndexFormatVersion},
                   {"dim", dim_},
                   {"count", size()},
                   {"corpus_id", provenance_.corpus_id},
                   {"description_format", to_string(provenance_.format)},
                   {"provider_id", provenance_.provider_id},
                   {"model_id", provenance_.model_id}};
    out << header.dump() << '\n';
    for (std::size_t i = 0; i < size(); ++i) {
        std::string line = "{\"tool_id\":" + json(tool_ids_[i]).dump() + ",\"values\":[";
        auto r = row(i);
        for (std::size_t d = 0; d < dim_; ++d) {
            if (d) line += ',';
            line += format_double(r[d]);
        }
        line += "]}\n";
        out << line;
    }
}

ToolIndex ToolIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open index " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw EmptyCorpus();
    try {
        auto header = json::parse(line);
        if (header.at("kind") != "ratatool-tool-index") throw DataError(path.string() + " is not a tool index");
        if (header.at("format_version") != kIndexFormatVersion) {
            throw DataError("unsupported index format_version in " + path.string());
        }
        IndexProvenance prov{header.at("corpus_id").get<std::string>(),
                             parse_format(header.at("description_format").get<std::string>()),
                             header.at("provider_id").get<std::string>(), header.at("model_id").get<std::string>()};
        auto dim = header.at("dim").get<std::size_t>();
        auto count = header.at("count").get<std::size_t>();
        std::vector<std::string> ids;
        std::vector<std::vector<double>> rows;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = json::parse(line);
            ids.push_back(j.at("tool_id").get<std::string>());
            rows.push_back(j.at("values").get<std::vector<double>>());
            if (rows.back().size() != dim) throw DimensionMismatch(dim, rows.back().size());
        }
        if (ids.size() != count) throw DataError("index " + path.string() + " is truncated");
        return ToolIndex(std::move(prov), std::move(ids), std::move(rows));
    } catch (const json::exception& e) {
        throw DataError("malformed index " + path.string() + ": " + e.what());
    }
}

ToolIndex build_index(const ToolCorpus& corpus, EmbeddingProvider& provider, DescriptionFormat format) {
    if (corpus.tools.empty()) throw EmptyCorpus();
    std::vector<std::string> ids, texts;
    for (const auto& t : corpus.tools) {
        ids.push_back(t.tool_id);
        texts.push_back(canonical_text(t, format));
    }
    auto vecs = provider.embed(texts);
    if (vecs.size() != texts.size()) throw DataError("provider returned the wrong number of vectors");
    std::vector<std::vector<double>> rows;
    rows.reserve(vecs.size());
    for (auto& v : vecs) rows.push_back(std::move(v.values));
    return ToolIndex({corpus.corpus_id, format, provider.provider_id(), provider.model_id()}, std::move(ids),
                     std::move(rows));
}

void check_provenance(const ToolIndex& index, const EmbeddingProvider& provider, DescriptionFormat format) {
    const auto& p = index.provenance();
    if (p.provider_id != provider.provider_id() || p.model_id != provider.model_id()) {
        throw ProvenanceMismatch("index was built with " + p.provider_id + "/" + p.model_id +
                                 " but the active provider is " + provider.provider_id() + "/" +
                                 provider.model_id());
    }
    if (p.format != format) {
        throw ProvenanceMismatch("index was built from " + std::string(to_string(p.format)) +
                                 " descriptions but the active format is " + std::string(to_string(format)));
    }
}

double similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    return similarity(std::span<const double>(a.values), std::span<const double>(b.values));
}

RetrievalResult rank_vector(std::span<const double> query, const ToolIndex& index, std::size_t k) {
    auto scores = index.scores(query);
    const auto& ids = index.tool_ids();
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    auto cmp = [&](std::size_t a, std::size_t b) { return ranks_before(scores[a], ids[a], scores[b], ids[b]); };
    if (k == 0 || k >= order.size()) {
        k = order.size();
        std::sort(order.begin(), order.end(), cmp);
    } else {
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), cmp);
    }
    RetrievalResult r;
    r.ranking.reserve(k);
    for (std::size_t i = 0; i < k; ++i) r.ranking.push_back({ids[order[i]], scores[order[i]]});
    return r;
}

std::size_t rank_of_vector(std::span<const double> query, const ToolIndex& index, const std::string& target) {
    auto t = index.position(target);
    auto scores = index.scores(query);
    const auto& ids = index.tool_ids();
    std::size_t ahead = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i != t && ranks_before(scores[i], ids[i], scores[t], ids[t])) ++ahead;
    }
    return ahead + 1;
}

namespace {

std::vector<double> embed_task(const TaskDescription& task, const ToolIndex& index, EmbeddingProvider& provider) {
    const auto& p = index.provenance();
    if (p.provider_id != provider.provider_id() || p.model_id != provider.model_id()) {
        throw ProvenanceMismatch("index was built with " + p.provider_id + "/" + p.model_id +
                                 " but the query is embedded with " + provider.provider_id() + "/" +
                                 provider.model_id());
    }
    auto v = provider.embed_one(canonical_text(task));
    if (v.dim() != index.dim()) throw DimensionMismatch(index.dim(), v.dim());
    return std::move(v.values);
}

}  // namespace

RetrievalResult select_tool(const TaskDescription& task, const ToolIndex& index, EmbeddingProvider& provider,
                            std::size_t k) {
    validate_task(task);
    return rank_vector(embed_task(task, index, provider), index, k);
}

std::size_t rank_of(const TaskDescription& task, const ToolIndex& index, EmbeddingProvider& provider,
                    const std::string& target_tool_id) {
    index.position(target_tool_id);
    validate_task(task);
    return rank_of_vector(embed_task(task, index, provider), index, target_tool_id);
}

}  // namespace ratatool
