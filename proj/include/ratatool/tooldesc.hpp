#pragma once

// Standardized three-field descriptions (input / process / output) for tools
// and generated task descriptions, plus the query model they are matched for.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ratatool {

enum class Modality { Text, Image, Audio };

inline constexpr std::array<Modality, 3> kAllModalities = {Modality::Text, Modality::Image,
                                                           Modality::Audio};

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view s);

/// Serialization flavor of a description: structured JSON or free prose.
enum class DescriptionFormat { Json, Nl };

std::string_view to_string(DescriptionFormat f);
DescriptionFormat parse_format(std::string_view s);

/// The five candidate-generation decoding presets.
enum class DecodingStrategy { Greedy, Beam5, SampleT07, SampleT10, SampleBeam3 };

inline constexpr std::array<DecodingStrategy, 5> kAllStrategies = {
    DecodingStrategy::Greedy, DecodingStrategy::Beam5, DecodingStrategy::SampleT07,
    DecodingStrategy::SampleT10, DecodingStrategy::SampleBeam3};

std::string_view to_string(DecodingStrategy s);
DecodingStrategy parse_strategy(std::string_view s);

/// The closed input/process/output schema. Fields are trimmed, never empty
/// once validated.
struct DescriptionFields {
    std::string input;
    std::string process;
    std::string output;

    bool operator==(const DescriptionFields&) const = default;
};

struct ToolDescription {
    std::string tool_id;
    DescriptionFields fields;
    Modality modality = Modality::Text;
    std::optional<std::string> source;

    bool operator==(const ToolDescription&) const = default;
};

enum class AttachmentKind { Image, Audio };

std::string_view to_string(AttachmentKind k);

struct Attachment {
    AttachmentKind kind = AttachmentKind::Image;
    std::string payload_ref;  // URI or file path; contents are never decoded
    std::string media_type;   // e.g. image/png

    bool operator==(const Attachment&) const = default;
};

struct Query {
    std::string query_id;
    std::string text;
    std::vector<Attachment> attachments;
    std::optional<std::string> gt_tool_id;

    bool operator==(const Query&) const = default;
};

/// A generated description of what a query asks for. For NL format the prose
/// lives in `fields.process` and input/output are empty.
struct TaskDescription {
    DescriptionFormat format = DescriptionFormat::Json;
    DescriptionFields fields;
    DecodingStrategy strategy = DecodingStrategy::Greedy;
    std::string raw;

    bool operator==(const TaskDescription&) const = default;
};

std::string trim(std::string_view s);

/// Parses and validates a closed {input, process, output} object.
/// Throws SchemaError naming the offending key.
DescriptionFields validate_tool(std::string_view raw_json);
DescriptionFields validate_fields(const nlohmann::json& obj);

/// Throws SchemaError unless the task obeys its format's non-emptiness rule.
void validate_task(const TaskDescription& task);

/// Deterministic single-line rendering used as embedding input and cache key.
/// JSON: {"input": "...", "process": "...", "output": "..."}.
/// NL: tool fields joined by single spaces; task prose verbatim.
std::string canonical_text(const DescriptionFields& fields, DescriptionFormat format);
std::string canonical_text(const ToolDescription& tool, DescriptionFormat format);
std::string canonical_text(const TaskDescription& task);

Modality modality_class(const Query& q);

/// Checks ids, non-empty text and attachment consistency. Returns the query's
/// modality class.
Modality validate_query(const Query& q);

// JSONL records. Unknown keys are rejected.

ToolDescription tool_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ToolDescription& t);
Query query_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Query& q);
nlohmann::json to_json(const DescriptionFields& f);

/// Reads one JSON object per non-blank line; errors carry the line number.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

std::vector<ToolDescription> load_tools(const std::filesystem::path& path);
std::vector<Query> load_queries(const std::filesystem::path& path);
void save_tools(const std::filesystem::path& path, const std::vector<ToolDescription>& tools);
void save_queries(const std::filesystem::path& path, const std::vector<Query>& queries);

}  // namespace ratatool
