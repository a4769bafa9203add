#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ratatool/errors.hpp"
#include "ratatool/tooldesc.hpp"

using namespace ratatool;
using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// The worked example object embedded in the shipped model-description prompt.
std::string rubert_example() {
    auto body = read_file(std::filesystem::path(RATATOOL_PROMPT_DIR) / "json_model_description.txt");
    auto at = body.find("rubert-base-cased");
    auto open = body.find('{', at);
    auto close = body.find('}', open);
    return body.substr(open, close - open + 1);
}

std::string schema_key(const std::string& raw) {
    try {
        validate_tool(raw);
    } catch (const SchemaError& e) {
        return e.key();
    }
    return "<accepted>";
}

}  // namespace

TEST(ValidateTool, AcceptsRubertExample) {
    auto f = validate_tool(rubert_example());
    EXPECT_EQ(f.input.rfind("Text written in Russian", 0), 0u);
    EXPECT_FALSE(f.process.empty());
    EXPECT_FALSE(f.output.empty());
}

TEST(ValidateTool, RejectsEmptyField) {
    EXPECT_EQ(schema_key(R"({"input":"x","process":"y","output":""})"), "output");
    EXPECT_EQ(schema_key(R"({"input":"x","process":"   ","output":"z"})"), "process");
}

TEST(ValidateTool, RejectsUnknownKey) {
    EXPECT_EQ(schema_key(R"({"input":"x","process":"y","output":"z","extra":1})"), "extra");
}

TEST(ValidateTool, RejectsMissingAndWrongType) {
    EXPECT_EQ(schema_key(R"({"input":"x","process":"y"})"), "output");
    EXPECT_EQ(schema_key(R"({"input":3,"process":"y","output":"z"})"), "input");
    EXPECT_THROW(validate_tool("[1,2]"), SchemaError);
    EXPECT_THROW(validate_tool("not json"), SchemaError);
}

TEST(ValidateTool, TrimsBoundariesKeepsInterior) {
    auto f = validate_tool(R"({"input":"  a  b ","process":"\ty\n","output":"z"})");
    EXPECT_EQ(f.input, "a  b");
    EXPECT_EQ(f.process, "y");
}

TEST(CanonicalText, FixedKeyOrder) {
    DescriptionFields f{"a", "b", "c"};
    EXPECT_EQ(canonical_text(f, DescriptionFormat::Json), R"({"input": "a", "process": "b", "output": "c"})");
}

TEST(CanonicalText, ConstructionOrderIrrelevant) {
    DescriptionFields a;
    a.output = "c";
    a.input = "a";
    a.process = "b";
    auto from_json = validate_tool(R"({"output":"c","process":"b","input":"a"})");
    EXPECT_EQ(canonical_text(a, DescriptionFormat::Json), canonical_text(from_json, DescriptionFormat::Json));
}

TEST(CanonicalText, EscapesSpecialCharacters) {
    DescriptionFields f{"quote \" here", "back\\slash", "tab\tnew\nline"};
    auto text = canonical_text(f, DescriptionFormat::Json);
    EXPECT_EQ(text.find('\n'), std::string::npos);
    EXPECT_EQ(validate_tool(text), f);
}

TEST(CanonicalText, NlForms) {
    DescriptionFields f{"a", "b", "c"};
    EXPECT_EQ(canonical_text(f, DescriptionFormat::Nl), "a b c");
    TaskDescription t{DescriptionFormat::Nl, {"", "free prose here", ""}, DecodingStrategy::Greedy, "raw"};
    EXPECT_EQ(canonical_text(t), "free prose here");
}

TEST(CanonicalText, RoundTripProperty) {
    std::mt19937_64 rng(11);
    const std::vector<std::string> pieces = {"a", "bc", " ", "XYZ", "\"", "\\", "/", "\t", "{", "}", ":", ",",
                                             "\xc3\xa9", "\xe6\x97\xa5"};
    auto random_text = [&] {
        std::string s;
        auto n = 1 + rng() % 12;
        for (std::size_t k = 0; k < n; ++k) s += pieces[rng() % pieces.size()];
        return trim(s);
    };
    int checked = 0;
    for (int i = 0; i < 500; ++i) {
        DescriptionFields f{random_text(), random_text(), random_text()};
        if (f.input.empty() || f.process.empty() || f.output.empty()) continue;
        auto text = canonical_text(f, DescriptionFormat::Json);
        EXPECT_EQ(validate_tool(text), f) << text;
        EXPECT_EQ(json::parse(text).size(), 3u);
        ++checked;
    }
    EXPECT_GT(checked, 300);
}

TEST(CanonicalText, InjectiveOnContent) {
    DescriptionFields a{"x y", "z", "w"};
    DescriptionFields b{"x", "y z", "w"};
    EXPECT_NE(canonical_text(a, DescriptionFormat::Json), canonical_text(b, DescriptionFormat::Json));
}

TEST(ModalityClass, ThreeWaySplit) {
    Query q{"q1", "hi", {}, std::nullopt};
    EXPECT_EQ(modality_class(q), Modality::Text);
    q.attachments.push_back({AttachmentKind::Image, "a.png", "image/png"});
    EXPECT_EQ(modality_class(q), Modality::Image);
    q.attachments.push_back({AttachmentKind::Image, "b.jpg", "image/jpeg"});
    EXPECT_EQ(modality_class(q), Modality::Image);
    Query a{"q2", "hi", {{AttachmentKind::Audio, "a.wav", "audio/wav"}}, std::nullopt};
    EXPECT_EQ(modality_class(a), Modality::Audio);
    q.attachments.push_back({AttachmentKind::Audio, "a.wav", "audio/wav"});
    EXPECT_THROW(modality_class(q), MixedModalityError);
}

TEST(ValidateQuery, AttachmentConsistency) {
    Query q{"q1", "hi", {{AttachmentKind::Image, "a.wav", "audio/wav"}}, std::nullopt};
    EXPECT_THROW(validate_query(q), DataError);
    q.attachments = {{AttachmentKind::Image, "", "image/png"}};
    EXPECT_THROW(validate_query(q), DataError);
    q.attachments = {{AttachmentKind::Image, "x.png", "image/png"}};
    EXPECT_EQ(validate_query(q), Modality::Image);
    q.text = "  ";
    EXPECT_THROW(validate_query(q), DataError);
}

TEST(ValidateTask, FormatRules) {
    TaskDescription j{DescriptionFormat::Json, {"a", "b", ""}, DecodingStrategy::Greedy, ""};
    EXPECT_THROW(validate_task(j), SchemaError);
    j.fields.output = "c";
    EXPECT_NO_THROW(validate_task(j));
    TaskDescription n{DescriptionFormat::Nl, {"", "prose", ""}, DecodingStrategy::Greedy, ""};
    EXPECT_NO_THROW(validate_task(n));
    n.fields.process = "";
    EXPECT_THROW(validate_task(n), SchemaError);
}

TEST(DecodingStrategy, ExactlyFiveVariants) {
    EXPECT_EQ(kAllStrategies.size(), 5u);
    for (auto s : kAllStrategies) EXPECT_EQ(parse_strategy(to_string(s)), s);
    EXPECT_THROW(parse_strategy("beam7"), SchemaError);
}

TEST(Jsonl, ToolAndQueryRecordsRoundTrip) {
    auto dir = std::filesystem::temp_directory_path() / "ratatool_tooldesc_rt";
    std::filesystem::create_directories(dir);
    std::vector<ToolDescription> tools = {
        {"t1", {"in", "proc", "out"}, Modality::Image, std::string("https://example.org/card")},
        {"t2", {"in \"q\"", "procé", "out"}, Modality::Audio, std::nullopt},
    };
    std::vector<Query> queries = {
        {"q1", "text only", {}, std::string("t1")},
        {"q2", "with image", {{AttachmentKind::Image, "x.png", "image/png"}}, std::nullopt},
    };
    save_tools(dir / "tools.jsonl", tools);
    save_queries(dir / "queries.jsonl", queries);
    EXPECT_EQ(load_tools(dir / "tools.jsonl"), tools);
    EXPECT_EQ(load_queries(dir / "queries.jsonl"), queries);
    std::filesystem::remove_all(dir);
}

TEST(Jsonl, RecordSchemaIsClosed) {
    json t = {{"tool_id", "t"}, {"input", "a"}, {"process", "b"}, {"output", "c"}, {"modality", "text"}};
    EXPECT_NO_THROW(tool_from_json(t));
    t["color"] = "red";
    EXPECT_THROW(tool_from_json(t), SchemaError);
    json q = {{"query_id", "q"}, {"text", "x"}, {"attachments", json::array()}, {"bogus", 1}};
    EXPECT_THROW(query_from_json(q), SchemaError);
}

TEST(Jsonl, DuplicateToolIdsRejected) {
    auto path = std::filesystem::temp_directory_path() / "ratatool_dup_tools.jsonl";
    {
        std::ofstream out(path);
        out << R"({"tool_id":"t","input":"a","process":"b","output":"c","modality":"text"})" << '\n';
        out << R"({"tool_id":"t","input":"d","process":"e","output":"f","modality":"text"})" << '\n';
    }
    EXPECT_THROW(load_tools(path), DataError);
    std::filesystem::remove(path);
}
