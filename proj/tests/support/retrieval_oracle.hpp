#pragma once

// Independent brute-force reference for retrieval, plus a provider that maps
// fixed texts to fixed vectors so select_tool can be driven with hand-placed
// embeddings.

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratatool/embed.hpp"
#include "ratatool/retrieve.hpp"

namespace ratatool::testing {

class TableProvider final : public EmbeddingProvider {
public:
    std::string provider_id() const override { return "table"; }
    std::string model_id() const override { return "fixed"; }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        std::vector<EmbeddingVector> out;
        for (const auto& t : texts) {
            auto it = table.find(t);
            if (it == table.end()) throw std::out_of_range("no vector for " + t);
            out.push_back({it->second, provider_id(), model_id()});
        }
        return out;
    }
    std::map<std::string, std::vector<double>> table;
};

inline TaskDescription prose_task(const std::string& text) {
    return {DescriptionFormat::Nl, {"", text, ""}, DecodingStrategy::Greedy, text};
}

inline ToolIndex table_index(const std::vector<std::string>& ids, const std::vector<std::vector<double>>& rows) {
    return ToolIndex({"oracle", DescriptionFormat::Nl, "table", "fixed"}, ids, rows);
}

struct OracleEntry {
    std::string tool_id;
    double score;
};

/// Plain dot products, then a comparison sort on (score desc, id asc).
inline std::vector<OracleEntry> oracle_ranking(const std::vector<std::string>& ids,
                                               const std::vector<std::vector<double>>& rows,
                                               const std::vector<double>& query) {
    std::vector<OracleEntry> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < query.size(); ++d) s += query[d] * rows[i][d];
        out.push_back({ids[i], s});
    }
    std::sort(out.begin(), out.end(), [](const OracleEntry& a, const OracleEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.tool_id < b.tool_id;
    });
    return out;
}

struct RandomInstance {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    std::vector<double> query;
};

/// Random instance with N in [1, max_n], dim in [1, max_dim]. Every other
/// instance uses a coarse half-integer grid and duplicated rows so exact
/// ties are common; ids are inserted in shuffled order.
inline RandomInstance random_instance(std::mt19937_64& rng, std::size_t max_n = 200, std::size_t max_dim = 64) {
    RandomInstance inst;
    std::size_t n = 1 + rng() % max_n;
    std::size_t dim = 1 + rng() % max_dim;
    bool coarse = rng() % 2 == 0;
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto draw = [&] {
        std::vector<double> v(dim);
        for (auto& x : v) x = coarse ? static_cast<double>(static_cast<int>(rng() % 5) - 2) * 0.5 : unit(rng);
        return v;
    };
    for (std::size_t i = 0; i < n; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "t%03zu", i);
        inst.ids.push_back(id);
        if (coarse && i > 0 && rng() % 4 == 0) {
            inst.rows.push_back(inst.rows[rng() % i]);
        } else {
            inst.rows.push_back(draw());
        }
    }
    for (std::size_t i = n; i > 1; --i) {
        auto j = rng() % i;
        std::swap(inst.ids[i - 1], inst.ids[j]);
    }
    inst.query = draw();
    return inst;
}

}  // namespace ratatool::testing
