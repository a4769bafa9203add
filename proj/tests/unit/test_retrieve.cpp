#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ratatool/corpus.hpp"
#include "ratatool/errors.hpp"
#include "ratatool/retrieve.hpp"
#include "retrieval_oracle.hpp"
#include "synthetic.hpp"

using namespace ratatool;
using namespace ratatool::testing;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Abc {
    TableProvider provider;
    ToolIndex index = table_index({"A", "B", "C"}, {{0.2, 0.0}, {0.9, 0.0}, {0.5, 0.0}});
    Abc() { provider.table["q"] = {1.0, 0.0}; }
};

}  // namespace

TEST(Similarity, HandValues) {
    std::vector<double> a{0.6, 0.8}, b{0.8, 0.6}, x{1, 0}, y{0, 1};
    EXPECT_NEAR(similarity(a, a), 1.0, 1e-15);
    EXPECT_EQ(similarity(x, y), 0.0);
    EXPECT_NEAR(similarity(a, b), 0.96, 1e-15);
    std::vector<double> c{1, 2, 3};
    EXPECT_THROW(similarity(a, c), DimensionMismatch);
}

TEST(SelectTool, ScoresAbc) {
    Abc s;
    auto r = select_tool(prose_task("q"), s.index, s.provider);
    EXPECT_EQ(r.selected(), "B");
    ASSERT_EQ(r.ranking.size(), 3u);
    EXPECT_EQ(r.ranking[1].tool_id, "C");
    EXPECT_EQ(r.ranking[2].tool_id, "A");
    EXPECT_EQ(rank_of(prose_task("q"), s.index, s.provider, "C"), 2u);
    EXPECT_EQ(rank_of(prose_task("q"), s.index, s.provider, "B"), 1u);
    EXPECT_EQ(rank_of(prose_task("q"), s.index, s.provider, "A"), 3u);
    EXPECT_THROW(rank_of(prose_task("q"), s.index, s.provider, "Z"), UnknownTool);
}

TEST(SelectTool, TopK) {
    Abc s;
    auto r = select_tool(prose_task("q"), s.index, s.provider, 2);
    ASSERT_EQ(r.ranking.size(), 2u);
    EXPECT_EQ(r.ranking[0].tool_id, "B");
    EXPECT_EQ(r.ranking[1].tool_id, "C");
}

TEST(SelectTool, SingleToolAlwaysSelected) {
    TableProvider p;
    p.table["q"] = {1.0, 0.0};
    auto idx = table_index({"only"}, {{-1.0, 0.0}});
    EXPECT_EQ(select_tool(prose_task("q"), idx, p).selected(), "only");
}

TEST(SelectTool, ExactTieGoesToSmallerId) {
    TableProvider p;
    p.table["q"] = {1.0, 0.0};
    auto idx = table_index({"B", "A", "C"}, {{0.5, 0.1}, {0.5, 0.3}, {0.1, 0.0}});
    auto r = select_tool(prose_task("q"), idx, p);
    EXPECT_EQ(r.selected(), "A");
    EXPECT_EQ(r.ranking[1].tool_id, "B");
}

TEST(RankVector, MatchesOracleOnRandomInstances) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 400; ++trial) {
        auto inst = random_instance(rng);
        auto idx = table_index(inst.ids, inst.rows);
        auto expect = oracle_ranking(inst.ids, inst.rows, inst.query);
        auto got = rank_vector(inst.query, idx);
        ASSERT_EQ(got.ranking.size(), expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i) {
            ASSERT_EQ(got.ranking[i].tool_id, expect[i].tool_id) << "trial " << trial << " pos " << i;
            ASSERT_EQ(got.ranking[i].score, expect[i].score);
        }
        auto target = inst.ids[rng() % inst.ids.size()];
        std::size_t pos = 0;
        while (expect[pos].tool_id != target) ++pos;
        EXPECT_EQ(rank_of_vector(inst.query, idx, target), pos + 1);
        EXPECT_EQ(rank_of_vector(inst.query, idx, got.selected()), 1u);
    }
}

TEST(RankVector, PermutationInvariant) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        auto inst = random_instance(rng, 60, 16);
        auto a = rank_vector(inst.query, table_index(inst.ids, inst.rows));
        std::vector<std::size_t> order(inst.ids.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::string> ids;
        std::vector<std::vector<double>> rows;
        for (auto i : order) {
            ids.push_back(inst.ids[i]);
            rows.push_back(inst.rows[i]);
        }
        auto b = rank_vector(inst.query, table_index(ids, rows));
        EXPECT_EQ(a.ranking, b.ranking);
    }
}

TEST(BuildIndex, SharedDimAndDeterministicBytes) {
    auto d = make_synthetic(3, 3, 1);
    LocalHashEmbedder e(32);
    auto idx = build_index(d.corpus, e, DescriptionFormat::Json);
    EXPECT_EQ(idx.size(), 3u);
    EXPECT_EQ(idx.dim(), 32u);
    EXPECT_EQ(idx.provenance().provider_id, "local-hash");

    auto dir = std::filesystem::temp_directory_path();
    idx.save(dir / "ratatool_idx_a.jsonl");
    build_index(d.corpus, e, DescriptionFormat::Json).save(dir / "ratatool_idx_b.jsonl");
    EXPECT_EQ(slurp(dir / "ratatool_idx_a.jsonl"), slurp(dir / "ratatool_idx_b.jsonl"));

    auto loaded = ToolIndex::load(dir / "ratatool_idx_a.jsonl");
    EXPECT_EQ(loaded.provenance(), idx.provenance());
    EXPECT_EQ(loaded.tool_ids(), idx.tool_ids());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        auto a = idx.row(i), b = loaded.row(i);
        EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
    }
    std::filesystem::remove(dir / "ratatool_idx_a.jsonl");
    std::filesystem::remove(dir / "ratatool_idx_b.jsonl");
}

TEST(BuildIndex, Errors) {
    LocalHashEmbedder e(16);
    EXPECT_THROW(build_index(ToolCorpus{"empty", {}}, e, DescriptionFormat::Json), EmptyCorpus);
    EXPECT_THROW(table_index({"a", "b"}, {{1, 0}, {1, 0, 0}}), DimensionMismatch);
    EXPECT_THROW(table_index({"a", "a"}, {{1, 0}, {0, 1}}), DataError);
    try {
        table_index({}, {});
        FAIL();
    } catch (const EmptyCorpus& ex) {
        EXPECT_STREQ(ex.what(), "empty tool index");
    }
}

TEST(BuildIndex, ProvenanceChecked) {
    auto d = make_synthetic(6, 0, 2);
    LocalHashEmbedder e32(32), e64(64);
    auto idx = build_index(d.corpus, e32, DescriptionFormat::Json);
    EXPECT_NO_THROW(check_provenance(idx, e32, DescriptionFormat::Json));
    EXPECT_THROW(check_provenance(idx, e64, DescriptionFormat::Json), ProvenanceMismatch);
    EXPECT_THROW(check_provenance(idx, e32, DescriptionFormat::Nl), ProvenanceMismatch);
    TaskDescription t{DescriptionFormat::Json, d.corpus.tools[0].fields, DecodingStrategy::Greedy, ""};
    EXPECT_THROW(select_tool(t, idx, e64), ProvenanceMismatch);
}

TEST(BuildIndex, CorruptFileRejected) {
    auto p = std::filesystem::temp_directory_path() / "ratatool_idx_bad.jsonl";
    {
        std::ofstream out(p);
        out << R"({"kind":"something-else"})" << '\n';
    }
    EXPECT_THROW(ToolIndex::load(p), DataError);
    std::filesystem::remove(p);
}

TEST(Scores, UnitVectorsStayInRange) {
    auto d = make_synthetic(40, 40, 6);
    LocalHashEmbedder e(64);
    auto idx = build_index(d.corpus, e, DescriptionFormat::Json);
    for (const auto& t : d.corpus.tools) {
        auto q = hash_embed(canonical_text(t, DescriptionFormat::Json), 64);
        for (double s : idx.scores(q)) {
            EXPECT_LE(s, 1.0 + 1e-12);
            EXPECT_GE(s, -1.0 - 1e-12);
        }
        EXPECT_EQ(rank_vector(q, idx).selected(), t.tool_id);
    }
}
