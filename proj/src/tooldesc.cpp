#include "ratatool/tooldesc.hpp"

#include <fstream>
#include <set>

#include "ratatool/errors.hpp"

namespace ratatool {

using nlohmann::json;

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

// JSON string literal, UTF-8 passed through unescaped.
std::string quote(const std::string& s) {
    return json(s).dump(-1, ' ', false, json::error_handler_t::replace);
}

const json& require(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(key, "missing field");
    return *it;
}

std::string require_text(const json& obj, const char* key) {
    const auto& v = require(obj, key);
    if (!v.is_string()) throw SchemaError(key, "wrong type for field");
    auto s = trim(v.get<std::string>());
    if (s.empty()) throw SchemaError(key, "empty field");
    return s;
}

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) throw SchemaError(key, "unknown key");
    }
}

}  // namespace

std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::Text: return "text";
        case Modality::Image: return "image";
        case Modality::Audio: return "audio";
    }
    return "text";
}

Modality parse_modality(std::string_view s) {
    auto l = lower_ascii(s);
    if (l == "text") return Modality::Text;
    if (l == "image") return Modality::Image;
    if (l == "audio") return Modality::Audio;
    throw SchemaError("modality", "unknown modality value " + std::string(s) + " for");
}

std::string_view to_string(DescriptionFormat f) {
    return f == DescriptionFormat::Json ? "json" : "nl";
}

DescriptionFormat parse_format(std::string_view s) {
    auto l = lower_ascii(s);
    if (l == "json") return DescriptionFormat::Json;
    if (l == "nl") return DescriptionFormat::Nl;
    throw ConfigError("unknown description format \"" + std::string(s) + "\" (expected json or nl)");
}

std::string_view to_string(DecodingStrategy s) {
    switch (s) {
        case DecodingStrategy::Greedy: return "greedy";
        case DecodingStrategy::Beam5: return "beam5";
        case DecodingStrategy::SampleT07: return "sample_t07";
        case DecodingStrategy::SampleT10: return "sample_t10";
        case DecodingStrategy::SampleBeam3: return "sample_beam3";
    }
    return "greedy";
}

DecodingStrategy parse_strategy(std::string_view s) {
    for (auto st : kAllStrategies) {
        if (to_string(st) == s) return st;
    }
    throw SchemaError("strategy", "unknown decoding strategy " + std::string(s) + " in");
}

std::string_view to_string(AttachmentKind k) {
    return k == AttachmentKind::Image ? "image" : "audio";
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

DescriptionFields validate_fields(const json& obj) {
    if (!obj.is_object()) throw SchemaError("<root>", "expected a JSON object at");
    reject_unknown_keys(obj, {"input", "process", "output"});
    DescriptionFields f;
    f.input = require_text(obj, "input");
    f.process = require_text(obj, "process");
    f.output = require_text(obj, "output");
    return f;
}

DescriptionFields validate_tool(std::string_view raw_json) {
    json obj;
    try {
        obj = json::parse(raw_json);
    } catch (const json::parse_error& e) {
        throw SchemaError("<root>", std::string("invalid JSON (") + e.what() + ") at");
    }
    return validate_fields(obj);
}

void validate_task(const TaskDescription& task) {
    if (task.format == DescriptionFormat::Json) {
        if (trim(task.fields.input).empty()) throw SchemaError("input", "empty field");
        if (trim(task.fields.process).empty()) throw SchemaError("process", "empty field");
        if (trim(task.fields.output).empty()) throw SchemaError("output", "empty field");
    } else if (trim(task.fields.process).empty()) {
        throw SchemaError("process", "empty field");
    }
}

std::string canonical_text(const DescriptionFields& f, DescriptionFormat format) {
    if (format == DescriptionFormat::Nl) {
        return f.input + " " + f.process + " " + f.output;
    }
    std::string out = "{\"input\": ";
    out += quote(f.input);
    out += ", \"process\": ";
    out += quote(f.process);
    out += ", \"output\": ";
    out += quote(f.output);
    out += "}";
    return out;
}

std::string canonical_text(const ToolDescription& tool, DescriptionFormat format) {
    return canonical_text(tool.fields, format);
}

std::string canonical_text(const TaskDescription& task) {
    if (task.format == DescriptionFormat::Nl) return task.fields.process;
    return canonical_text(task.fields, DescriptionFormat::Json);
}

Modality modality_class(const Query& q) {
    bool image = false, audio = false;
    for (const auto& a : q.attachments) {
        image = image || a.kind == AttachmentKind::Image;
        audio = audio || a.kind == AttachmentKind::Audio;
    }
    if (image && audio) throw MixedModalityError(q.query_id);
    if (image) return Modality::Image;
    if (audio) return Modality::Audio;
    return Modality::Text;
}

Modality validate_query(const Query& q) {
    if (q.query_id.empty()) throw SchemaError("query_id", "empty field");
    if (trim(q.text).empty()) throw SchemaError("text", "empty field");
    for (const auto& a : q.attachments) {
        if (a.payload_ref.empty()) throw SchemaError("payload_ref", "empty field");
        auto major = a.media_type.substr(0, a.media_type.find('/'));
        if (lower_ascii(major) != to_string(a.kind)) {
            throw SchemaError("media_type", "media type " + a.media_type + " inconsistent with kind in");
        }
    }
    if (q.gt_tool_id && q.gt_tool_id->empty()) throw SchemaError("gt_tool_id", "empty field");
    return modality_class(q);
}

ToolDescription tool_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("<root>", "expected a JSON object at");
    reject_unknown_keys(j, {"tool_id", "input", "process", "output", "modality", "source"});
    ToolDescription t;
    t.tool_id = require_text(j, "tool_id");
    t.fields.input = require_text(j, "input");
    t.fields.process = require_text(j, "process");
    t.fields.output = require_text(j, "output");
    const auto& m = require(j, "modality");
    if (!m.is_string()) throw SchemaError("modality", "wrong type for field");
    t.modality = parse_modality(m.get<std::string>());
    if (auto it = j.find("source"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw SchemaError("source", "wrong type for field");
        t.source = it->get<std::string>();
    }
    return t;
}

json to_json(const DescriptionFields& f) {
    json j = json::object();
    j["input"] = f.input;
    j["process"] = f.process;
    j["output"] = f.output;
    return j;
}

json to_json(const ToolDescription& t) {
    json j = json::object();
    j["tool_id"] = t.tool_id;
    j["input"] = t.fields.input;
    j["process"] = t.fields.process;
    j["output"] = t.fields.output;
    j["modality"] = to_string(t.modality);
    if (t.source) j["source"] = *t.source;
    return j;
}

Query query_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("<root>", "expected a JSON object at");
    reject_unknown_keys(j, {"query_id", "text", "attachments", "gt_tool_id"});
    Query q;
    q.query_id = require_text(j, "query_id");
    const auto& text = require(j, "text");
    if (!text.is_string()) throw SchemaError("text", "wrong type for field");
    q.text = text.get<std::string>();
    if (auto it = j.find("attachments"); it != j.end()) {
        if (!it->is_array()) throw SchemaError("attachments", "wrong type for field");
        for (const auto& a : *it) {
            if (!a.is_object()) throw SchemaError("attachments", "wrong type for element of");
            reject_unknown_keys(a, {"kind", "payload_ref", "media_type"});
            Attachment att;
            auto kind = lower_ascii(require_text(a, "kind"));
            if (kind == "image") {
                att.kind = AttachmentKind::Image;
            } else if (kind == "audio") {
                att.kind = AttachmentKind::Audio;
            } else {
                throw SchemaError("kind", "unknown attachment kind " + kind + " in");
            }
            att.payload_ref = require_text(a, "payload_ref");
            att.media_type = require_text(a, "media_type");
            q.attachments.push_back(std::move(att));
        }
    }
    if (auto it = j.find("gt_tool_id"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw SchemaError("gt_tool_id", "wrong type for field");
        q.gt_tool_id = it->get<std::string>();
    }
    validate_query(q);
    return q;
}

json to_json(const Query& q) {
    json j = json::object();
    j["query_id"] = q.query_id;
    j["text"] = q.text;
    json atts = json::array();
    for (const auto& a : q.attachments) {
        atts.push_back({{"kind", to_string(a.kind)},
                        {"payload_ref", a.payload_ref},
                        {"media_type", a.media_type}});
    }
    j["attachments"] = std::move(atts);
    if (q.gt_tool_id) j["gt_tool_id"] = *q.gt_tool_id;
    return j;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& r : rows) {
        out << r.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    }
}

namespace {

template <typename T, typename Parse>
std::vector<T> load_records(const std::filesystem::path& path, Parse parse) {
    std::vector<T> out;
    std::size_t row = 0;
    for (const auto& j : read_jsonl(path)) {
        ++row;
        try {
            out.push_back(parse(j));
        } catch (const SchemaError& e) {
            throw SchemaError(e.key(), path.string() + " record " + std::to_string(row) + ": " + e.what() +
                                           "; offending key");
        }
    }
    return out;
}

}  // namespace

std::vector<ToolDescription> load_tools(const std::filesystem::path& path) {
    auto tools = load_records<ToolDescription>(path, tool_from_json);
    std::set<std::string> seen;
    for (const auto& t : tools) {
        if (!seen.insert(t.tool_id).second) throw SchemaError("tool_id", "duplicate tool_id " + t.tool_id + " for");
    }
    return tools;
}

std::vector<Query> load_queries(const std::filesystem::path& path) {
    auto queries = load_records<Query>(path, query_from_json);
    std::set<std::string> seen;
    for (const auto& q : queries) {
        if (!seen.insert(q.query_id).second) {
            throw SchemaError("query_id", "duplicate query_id " + q.query_id + " for");
        }
    }
    return queries;
}

void save_tools(const std::filesystem::path& path, const std::vector<ToolDescription>& tools) {
    std::vector<json> rows;
    rows.reserve(tools.size());
    for (const auto& t : tools) rows.push_back(to_json(t));
    write_jsonl(path, rows);
}

void save_queries(const std::filesystem::path& path, const std::vector<Query>& queries) {
    std::vector<json> rows;
    rows.reserve(queries.size());
    for (const auto& q : queries) rows.push_back(to_json(q));
    write_jsonl(path, rows);
}

}  // namespace ratatool
