#pragma once

// Description generation: prompt templates, a chat-completion client, and a
// seeded mock generator used as a test oracle.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ratatool/corpus.hpp"
#include "ratatool/http.hpp"
#include "ratatool/tooldesc.hpp"

namespace ratatool {

enum class TemplateName { JsonModelDescription, JsonInference, NlModelDescription, NlInference };

struct PromptTemplate {
    TemplateName name;
    std::string_view asset;  // file name of the shipped asset
    std::string_view body;
    std::vector<std::string_view> placeholders;
    int in_context_examples = 0;
};

const PromptTemplate& prompt_template(TemplateName name);
TemplateName model_description_template(DescriptionFormat format);
TemplateName inference_template(DescriptionFormat format);

/// Placeholder names ({name}) appearing in a template body, in order of first use.
std::vector<std::string> placeholders_in(std::string_view body);

/// Single-pass substitution of every {placeholder}. Extra args are ignored.
/// Throws MissingPlaceholder.
std::string render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& args);

struct GenerationConfig {
    DecodingStrategy strategy = DecodingStrategy::Greedy;
    double temperature = 0.0;
    int num_beams = 1;
    bool do_sample = false;
    std::optional<std::uint64_t> seed;

    /// The sanctioned settings for a strategy.
    static GenerationConfig preset(DecodingStrategy strategy, std::optional<std::uint64_t> seed = std::nullopt);

    /// Throws ConfigError if the settings contradict the strategy.
    void validate() const;
};

struct ContentPart {
    enum class Kind { Text, Image, Audio } kind = Kind::Text;
    std::string text;        // Text
    std::string url;         // Image: data: or http(s) URL
    std::string data_b64;    // Audio
    std::string format;      // Audio container, e.g. wav
};

struct ChatMessage {
    std::string role;
    std::vector<ContentPart> content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    GenerationConfig config;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    /// Returns the assistant message text. Throws GenerationError on failure.
    virtual std::string complete(const ChatRequest& request) = 0;
};

struct RemoteChatConfig {
    std::string endpoint;
    std::string model;
    std::string token;
    http::RetryPolicy retry;

    /// Reads RATATOOL_CHAT_URL, RATATOOL_CHAT_MODEL and RATATOOL_CHAT_TOKEN.
    static RemoteChatConfig from_env();
};

/// Wire body for a request: {"model", "messages", "temperature", "seed"?, ...}.
nlohmann::json chat_request_body(const ChatRequest& request, const std::string& model);

class RemoteChatClient final : public ChatClient {
public:
    explicit RemoteChatClient(RemoteChatConfig config);
    std::string complete(const ChatRequest& request) override;

private:
    RemoteChatConfig config_;
};

std::string base64_encode(std::string_view bytes);

/// Attachment -> content part. Files (or file:// URIs) are read and base64
/// encoded; data: and http(s) URLs are forwarded for images.
ContentPart attachment_part(const Attachment& a);

/// First balanced {...} region (string-aware) that parses as a JSON object.
std::optional<nlohmann::json> extract_json_object(std::string_view text);

/// Output of model-card conversion. NL prose is stored in fields.process.
struct GeneratedDescription {
    DescriptionFormat format = DescriptionFormat::Json;
    DescriptionFields fields;
    std::vector<std::string> raw_outputs;
};

/// Converts a model card via the matching template. JSON output that fails
/// extraction or validation gets one re-prompt; a second failure throws
/// ParseError carrying both raw outputs.
GeneratedDescription describe_tool(const std::string& model_card, DescriptionFormat format, ChatClient& client,
                                   const GenerationConfig& config = GenerationConfig::preset(DecodingStrategy::Greedy));

struct GenerationRecord {
    std::string query_id;
    DecodingStrategy strategy = DecodingStrategy::Greedy;
    std::string raw_output;
    std::optional<TaskDescription> parsed;
    std::optional<std::string> parse_error;

    nlohmann::json to_json() const;
    static GenerationRecord from_json(const nlohmann::json& j);
};

/// Parses raw generator output under a format. Failures land in parse_error.
GenerationRecord parse_generation(const std::string& query_id, DecodingStrategy strategy, DescriptionFormat format,
                                  std::string raw);

ChatRequest task_request(const Query& q, DescriptionFormat format, const GenerationConfig& config);

/// Generates a task description for one query. Transport failures throw
/// GenerationError; parse failures are recorded in the result.
GenerationRecord describe_task(const Query& q, DescriptionFormat format, const GenerationConfig& config,
                               ChatClient& client);

/// Batch form with bounded parallelism; records come back in query order.
std::vector<GenerationRecord> describe_tasks(std::span<const Query> queries, DescriptionFormat format,
                                             const GenerationConfig& config, ChatClient& client,
                                             std::size_t parallelism = 2);

/// The ground-truth tool's description with round(noise * n) of its word
/// tokens replaced by seeded random corpus words. Throws UnknownTool.
TaskDescription mock_generate(const Query& q, const ToolCorpus& corpus, double noise, std::uint64_t seed,
                              DescriptionFormat format = DescriptionFormat::Json);

/// Produces task descriptions for queries; evaluate() is written against this.
class TaskGenerator {
public:
    virtual ~TaskGenerator() = default;
    virtual GenerationRecord generate(const Query& q) = 0;
};

class MockGenerator final : public TaskGenerator {
public:
    MockGenerator(const ToolCorpus& corpus, double noise, std::uint64_t seed,
                  DescriptionFormat format = DescriptionFormat::Json);
    GenerationRecord generate(const Query& q) override;

private:
    const ToolCorpus& corpus_;
    double noise_;
    std::uint64_t seed_;
    DescriptionFormat format_;
};

class ChatGenerator final : public TaskGenerator {
public:
    ChatGenerator(ChatClient& client, DescriptionFormat format, GenerationConfig config)
        : client_(client), format_(format), config_(std::move(config)) {}
    GenerationRecord generate(const Query& q) override { return describe_task(q, format_, config_, client_); }

private:
    ChatClient& client_;
    DescriptionFormat format_;
    GenerationConfig config_;
};

}  // namespace ratatool
