#include "ratatool/llmclient.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "ratatool/errors.hpp"
#include "ratatool/parallel.hpp"
#include "ratatool/rng.hpp"

namespace ratatool {

using nlohmann::json;

namespace prompt_assets {
// Generated from assets/prompts at build time.
extern const std::string_view kJsonModelDescription;
extern const std::string_view kJsonInference;
extern const std::string_view kNlModelDescription;
extern const std::string_view kNlInference;
}  // namespace prompt_assets

namespace {

constexpr std::string_view kReprompt = "\n\nReturn only a valid JSON object.";
constexpr std::string_view kExampleImageMarker = "<image>";

bool is_placeholder_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

// Calls f(start, end, name) for every {name} occurrence.
template <typename F>
void scan_placeholders(std::string_view body, F&& f) {
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < body.size() && is_placeholder_char(body[j])) ++j;
        if (j > i + 1 && j < body.size() && body[j] == '}') {
            f(i, j + 1, body.substr(i + 1, j - i - 1));
            i = j;
        }
    }
}

PromptTemplate make_template(TemplateName name, std::string_view asset, std::string_view body, int examples) {
    PromptTemplate t{name, asset, body, {}, examples};
    std::set<std::string_view> seen;
    scan_placeholders(body, [&](std::size_t, std::size_t, std::string_view p) {
        if (seen.insert(p).second) t.placeholders.push_back(p);
    });
    return t;
}

}  // namespace

const PromptTemplate& prompt_template(TemplateName name) {
    static const PromptTemplate templates[] = {
        make_template(TemplateName::JsonModelDescription, "json_model_description.txt",
                      prompt_assets::kJsonModelDescription, 1),
        make_template(TemplateName::JsonInference, "json_inference.txt", prompt_assets::kJsonInference, 2),
        make_template(TemplateName::NlModelDescription, "nl_model_description.txt",
                      prompt_assets::kNlModelDescription, 1),
        make_template(TemplateName::NlInference, "nl_inference.txt", prompt_assets::kNlInference, 2),
    };
    return templates[static_cast<int>(name)];
}

TemplateName model_description_template(DescriptionFormat format) {
    return format == DescriptionFormat::Json ? TemplateName::JsonModelDescription : TemplateName::NlModelDescription;
}

TemplateName inference_template(DescriptionFormat format) {
    return format == DescriptionFormat::Json ? TemplateName::JsonInference : TemplateName::NlInference;
}

std::vector<std::string> placeholders_in(std::string_view body) {
    std::vector<std::string> out;
    scan_placeholders(body, [&](std::size_t, std::size_t, std::string_view p) {
        if (std::find(out.begin(), out.end(), p) == out.end()) out.emplace_back(p);
    });
    return out;
}

std::string render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& args) {
    for (auto p : tmpl.placeholders) {
        if (!args.count(std::string(p))) throw MissingPlaceholder(std::string(p));
    }
    std::string out;
    out.reserve(tmpl.body.size());
    std::size_t copied = 0;
    scan_placeholders(tmpl.body, [&](std::size_t start, std::size_t end, std::string_view p) {
        out.append(tmpl.body.substr(copied, start - copied));
        out += args.at(std::string(p));
        copied = end;
    });
    out.append(tmpl.body.substr(copied));
    return out;
}

GenerationConfig GenerationConfig::preset(DecodingStrategy strategy, std::optional<std::uint64_t> seed) {
    GenerationConfig c;
    c.strategy = strategy;
    c.seed = seed;
    switch (strategy) {
        case DecodingStrategy::Greedy: break;
        case DecodingStrategy::Beam5: c.num_beams = 5; break;
        case DecodingStrategy::SampleT07:
            c.temperature = 0.7;
            c.do_sample = true;
            break;
        case DecodingStrategy::SampleT10:
            c.temperature = 1.0;
            c.do_sample = true;
            break;
        case DecodingStrategy::SampleBeam3:
            c.temperature = 1.0;
            c.num_beams = 3;
            c.do_sample = true;
            break;
    }
    return c;
}

void GenerationConfig::validate() const {
    auto fail = [&](const std::string& why) {
        throw ConfigError("generation config for " + std::string(to_string(strategy)) + ": " + why);
    };
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) fail("temperature must be finite and >= 0");
    if (num_beams < 1) fail("num_beams must be positive");
    switch (strategy) {
        case DecodingStrategy::Greedy:
            if (temperature != 0.0 || num_beams != 1 || do_sample) fail("greedy needs temperature 0, 1 beam");
            break;
        case DecodingStrategy::Beam5:
            if (num_beams != 5 || do_sample) fail("beam5 needs 5 beams without sampling");
            break;
        case DecodingStrategy::SampleT07:
            if (temperature != 0.7 || !do_sample) fail("sample_t07 needs sampling at temperature 0.7");
            break;
        case DecodingStrategy::SampleT10:
            if (temperature != 1.0 || !do_sample) fail("sample_t10 needs sampling at temperature 1.0");
            break;
        case DecodingStrategy::SampleBeam3:
            if (num_beams != 3 || !do_sample) fail("sample_beam3 needs 3 beams with sampling");
            break;
    }
}

RemoteChatConfig RemoteChatConfig::from_env() {
    RemoteChatConfig c;
    if (const char* v = std::getenv("RATATOOL_CHAT_URL")) c.endpoint = v;
    if (const char* v = std::getenv("RATATOOL_CHAT_MODEL")) c.model = v;
    if (const char* v = std::getenv("RATATOOL_CHAT_TOKEN")) c.token = v;
    return c;
}

json chat_request_body(const ChatRequest& request, const std::string& model) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        json content = json::array();
        for (const auto& p : m.content) {
            switch (p.kind) {
                case ContentPart::Kind::Text: content.push_back({{"type", "text"}, {"text", p.text}}); break;
                case ContentPart::Kind::Image:
                    content.push_back({{"type", "image_url"}, {"image_url", {{"url", p.url}}}});
                    break;
                case ContentPart::Kind::Audio:
                    content.push_back(
                        {{"type", "input_audio"}, {"input_audio", {{"data", p.data_b64}, {"format", p.format}}}});
                    break;
            }
        }
        messages.push_back({{"role", m.role}, {"content", std::move(content)}});
    }
    json body = {{"model", model}, {"messages", std::move(messages)}, {"temperature", request.config.temperature}};
    if (request.config.seed) body["seed"] = *request.config.seed;
    if (request.config.num_beams > 1) body["num_beams"] = request.config.num_beams;
    if (request.config.do_sample && request.config.num_beams > 1) body["do_sample"] = true;
    return body;
}

RemoteChatClient::RemoteChatClient(RemoteChatConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ConfigError("chat client needs an endpoint (RATATOOL_CHAT_URL)");
    if (config_.model.empty()) throw ConfigError("chat client needs a model id (RATATOOL_CHAT_MODEL)");
    http::parse_url(config_.endpoint);
}

std::string RemoteChatClient::complete(const ChatRequest& request) {
    auto body = chat_request_body(request, config_.model).dump(-1, ' ', false, json::error_handler_t::replace);
    http::Headers headers;
    if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);
    http::Response res;
    bool ok = false;
    try {
        ok = http::with_retry(config_.retry, [&] {
            res = http::post_json(config_.endpoint, body, headers);
            if (res.status >= 200 && res.status < 300) return true;
            if (http::is_transient(res.status)) return false;
            throw GenerationError("chat api error " + std::to_string(res.status) + ": " + res.body.substr(0, 200));
        });
    } catch (const NetworkError& e) {
        throw GenerationError(e.what());
    }
    if (!ok) {
        throw GenerationError("chat api error " + std::to_string(res.status) + ": " + res.body.substr(0, 200));
    }
    try {
        auto j = json::parse(res.body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (content.is_string()) return content.get<std::string>();
        // Some servers return content as a list of parts.
        std::string text;
        for (const auto& part : content) {
            if (part.value("type", "") == "text") text += part.at("text").get<std::string>();
        }
        return text;
    } catch (const json::exception& e) {
        throw GenerationError(std::string("malformed chat response: ") + e.what());
    }
}

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    auto n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                             reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

ContentPart attachment_part(const Attachment& a) {
    ContentPart part;
    part.kind = a.kind == AttachmentKind::Image ? ContentPart::Kind::Image : ContentPart::Kind::Audio;
    const auto& ref = a.payload_ref;
    bool remote = ref.rfind("http://", 0) == 0 || ref.rfind("https://", 0) == 0;
    bool data_uri = ref.rfind("data:", 0) == 0;
    if (part.kind == ContentPart::Kind::Image && (remote || data_uri)) {
        part.url = ref;
        return part;
    }
    if (remote || data_uri) {
        throw GenerationError("audio attachment must be a local file: " + ref);
    }
    auto path = ref.rfind("file://", 0) == 0 ? ref.substr(7) : ref;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw GenerationError("cannot read attachment " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    auto b64 = base64_encode(ss.str());
    if (part.kind == ContentPart::Kind::Image) {
        part.url = "data:" + a.media_type + ";base64," + b64;
    } else {
        part.data_b64 = std::move(b64);
        auto slash = a.media_type.find('/');
        part.format = slash == std::string::npos ? "wav" : a.media_type.substr(slash + 1);
    }
    return part;
}

std::optional<json> extract_json_object(std::string_view text) {
    for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false, escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}' && --depth == 0) {
                auto parsed = json::parse(text.substr(start, i - start + 1), nullptr, false);
                if (!parsed.is_discarded() && parsed.is_object()) return parsed;
                break;
            }
        }
    }
    return std::nullopt;
}

namespace {

std::optional<DescriptionFields> try_parse_fields(const std::string& raw, std::string* error) {
    auto obj = extract_json_object(raw);
    if (!obj) {
        if (error) *error = "no JSON object found";
        return std::nullopt;
    }
    try {
        return validate_fields(*obj);
    } catch (const SchemaError& e) {
        if (error) *error = e.what();
        return std::nullopt;
    }
}

ChatRequest text_request(const std::string& prompt, const GenerationConfig& config) {
    ChatRequest req;
    req.config = config;
    ChatMessage m{"user", {}};
    m.content.push_back({ContentPart::Kind::Text, prompt, {}, {}, {}});
    req.messages.push_back(std::move(m));
    return req;
}

}  // namespace

GeneratedDescription describe_tool(const std::string& model_card, DescriptionFormat format, ChatClient& client,
                                   const GenerationConfig& config) {
    if (trim(model_card).empty()) throw DataError("empty model card");
    config.validate();
    auto prompt = render_prompt(prompt_template(model_description_template(format)), {{"model_card", model_card}});
    GeneratedDescription out;
    out.format = format;

    out.raw_outputs.push_back(client.complete(text_request(prompt, config)));
    if (format == DescriptionFormat::Nl) {
        auto prose = trim(out.raw_outputs.back());
        if (prose.empty()) throw ParseError("empty NL description", out.raw_outputs);
        out.fields.process = std::move(prose);
        return out;
    }
    std::string error;
    if (auto f = try_parse_fields(out.raw_outputs.back(), &error)) {
        out.fields = std::move(*f);
        return out;
    }
    out.raw_outputs.push_back(client.complete(text_request(prompt + std::string(kReprompt), config)));
    if (auto f = try_parse_fields(out.raw_outputs.back(), &error)) {
        out.fields = std::move(*f);
        return out;
    }
    throw ParseError("no valid JSON description after re-prompt: " + error, out.raw_outputs);
}

json GenerationRecord::to_json() const {
    json j = {{"query_id", query_id}, {"strategy", to_string(strategy)}, {"raw_output", raw_output}};
    if (parsed) {
        j["format"] = to_string(parsed->format);
        j["parsed"] = ratatool::to_json(parsed->fields);
    }
    if (parse_error) j["parse_error"] = *parse_error;
    return j;
}

GenerationRecord GenerationRecord::from_json(const json& j) {
    GenerationRecord r;
    try {
        r.query_id = j.at("query_id").get<std::string>();
        r.strategy = parse_strategy(j.at("strategy").get<std::string>());
        r.raw_output = j.at("raw_output").get<std::string>();
        bool has_parsed = j.contains("parsed") && !j.at("parsed").is_null();
        bool has_error = j.contains("parse_error") && !j.at("parse_error").is_null();
        if (has_parsed == has_error) {
            throw SchemaError("parsed", "exactly one of parsed/parse_error must be set; check");
        }
        if (has_parsed) {
            TaskDescription t;
            t.format = parse_format(j.value("format", "json"));
            t.strategy = r.strategy;
            t.raw = r.raw_output;
            const auto& p = j.at("parsed");
            if (t.format == DescriptionFormat::Json) {
                t.fields = validate_fields(p);
            } else {
                t.fields.process = trim(p.at("process").get<std::string>());
            }
            validate_task(t);
            r.parsed = std::move(t);
        } else {
            r.parse_error = j.at("parse_error").get<std::string>();
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed generation record: ") + e.what());
    }
    return r;
}

GenerationRecord parse_generation(const std::string& query_id, DecodingStrategy strategy, DescriptionFormat format,
                                  std::string raw) {
    GenerationRecord r;
    r.query_id = query_id;
    r.strategy = strategy;
    r.raw_output = std::move(raw);
    TaskDescription t;
    t.format = format;
    t.strategy = strategy;
    t.raw = r.raw_output;
    if (format == DescriptionFormat::Nl) {
        t.fields.process = trim(r.raw_output);
        if (t.fields.process.empty()) {
            r.parse_error = "empty NL description";
            return r;
        }
    } else {
        std::string error;
        auto f = try_parse_fields(r.raw_output, &error);
        if (!f) {
            r.parse_error = error;
            return r;
        }
        t.fields = std::move(*f);
    }
    r.parsed = std::move(t);
    return r;
}

ChatRequest task_request(const Query& q, DescriptionFormat format, const GenerationConfig& config) {
    auto prompt = render_prompt(prompt_template(inference_template(format)),
                                {{"query", q.text}, {"query_2_image", std::string(kExampleImageMarker)}});
    auto req = text_request(prompt, config);
    for (const auto& a : q.attachments) req.messages.front().content.push_back(attachment_part(a));
    return req;
}

GenerationRecord describe_task(const Query& q, DescriptionFormat format, const GenerationConfig& config,
                               ChatClient& client) {
    validate_query(q);
    config.validate();
    auto raw = client.complete(task_request(q, format, config));
    return parse_generation(q.query_id, config.strategy, format, std::move(raw));
}

std::vector<GenerationRecord> describe_tasks(std::span<const Query> queries, DescriptionFormat format,
                                             const GenerationConfig& config, ChatClient& client,
                                             std::size_t parallelism) {
    std::vector<GenerationRecord> out(queries.size());
    parallel_for(queries.size(), parallelism,
                 [&](std::size_t i) { out[i] = describe_task(queries[i], format, config, client); });
    return out;
}

namespace {

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> words;
    std::istringstream in(s);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

}  // namespace

TaskDescription mock_generate(const Query& q, const ToolCorpus& corpus, double noise, std::uint64_t seed,
                              DescriptionFormat format) {
    if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("mock noise must lie in [0, 1]");
    if (!q.gt_tool_id) throw UnknownTool("<none>");
    const auto* tool = corpus.find(*q.gt_tool_id);
    if (!tool) throw UnknownTool(*q.gt_tool_id);

    TaskDescription task;
    task.format = format;
    task.strategy = DecodingStrategy::Greedy;
    if (noise == 0.0) {
        task.fields = tool->fields;
    } else {
        std::set<std::string> vocab_set;
        for (const auto& t : corpus.tools) {
            for (const auto* f : {&t.fields.input, &t.fields.process, &t.fields.output}) {
                for (auto& w : split_words(*f)) vocab_set.insert(std::move(w));
            }
        }
        std::vector<std::string> vocab(vocab_set.begin(), vocab_set.end());

        std::array<std::vector<std::string>, 3> fields = {
            split_words(tool->fields.input), split_words(tool->fields.process), split_words(tool->fields.output)};
        std::vector<std::pair<std::size_t, std::size_t>> slots;
        for (std::size_t f = 0; f < 3; ++f) {
            for (std::size_t w = 0; w < fields[f].size(); ++w) slots.emplace_back(f, w);
        }
        Rng rng(seed ^ fnv1a64(q.query_id));
        shuffle(std::span(slots), rng);
        auto replace = static_cast<std::size_t>(std::llround(noise * static_cast<double>(slots.size())));
        for (std::size_t i = 0; i < replace; ++i) {
            auto [f, w] = slots[i];
            fields[f][w] = vocab[uniform_index(rng, vocab.size())];
        }
        task.fields = {join_words(fields[0]), join_words(fields[1]), join_words(fields[2])};
    }
    if (format == DescriptionFormat::Nl) {
        task.fields = {"", canonical_text(task.fields, DescriptionFormat::Nl), ""};
    }
    task.raw = canonical_text(task);
    return task;
}

MockGenerator::MockGenerator(const ToolCorpus& corpus, double noise, std::uint64_t seed, DescriptionFormat format)
    : corpus_(corpus), noise_(noise), seed_(seed), format_(format) {
    if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("mock noise must lie in [0, 1]");
}

GenerationRecord MockGenerator::generate(const Query& q) {
    auto task = mock_generate(q, corpus_, noise_, seed_, format_);
    GenerationRecord r;
    r.query_id = q.query_id;
    r.strategy = task.strategy;
    r.raw_output = task.raw;
    r.parsed = std::move(task);
    return r;
}

}  // namespace ratatool
