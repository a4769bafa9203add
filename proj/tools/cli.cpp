#include "cli.hpp"

#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ratatool/align.hpp"
#include "ratatool/corpus.hpp"
#include "ratatool/embed.hpp"
#include "ratatool/errors.hpp"
#include "ratatool/eval.hpp"
#include "ratatool/llmclient.hpp"
#include "ratatool/prefgen.hpp"
#include "ratatool/retrieve.hpp"
#include "ratatool/tooldesc.hpp"

namespace ratatool::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Every setting a subcommand can read, with its default. Flags use the same
// names with dashes; config files use the underscore form.
const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"format", "json"},     {"provider", "local"}, {"dim", "256"},        {"ratio", "0.9"},
        {"k", "10"},            {"beta", "0.1"},       {"parallelism", "4"},  {"generator", "mock"},
        {"noise", "0"},         {"strategy", "greedy"}, {"eval_fraction", ""},
    };
    return d;
}

const std::vector<std::string>& path_keys() {
    static const std::vector<std::string> keys = {"corpus", "queries", "index", "split", "input", "cache"};
    return keys;
}

bool looks_secret(const std::string& key) {
    return key.find("token") != std::string::npos || key.find("secret") != std::string::npos ||
           key.find("password") != std::string::npos || key.find("api_key") != std::string::npos;
}

class RunConfig {
public:
    std::map<std::string, std::string> values;  // resolved, without defaults

    bool has(const std::string& key) const { return values.count(key) > 0 && !values.at(key).empty(); }

    std::string str(const std::string& key) const {
        if (has(key)) return values.at(key);
        if (auto it = defaults().find(key); it != defaults().end() && !it->second.empty()) return it->second;
        throw ConfigError("missing required setting --" + dashed(key));
    }

    fs::path path(const std::string& key) const {
        fs::path p = str(key);
        if (!fs::exists(p)) throw ConfigError("--" + dashed(key) + " path does not exist: " + p.string());
        return p;
    }

    std::uint64_t u64(const std::string& key) const {
        auto s = str(key);
        try {
            std::size_t used = 0;
            auto v = std::stoull(s, &used);
            if (used != s.size() || s.front() == '-') throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("--" + dashed(key) + " must be a non-negative integer, got \"" + s + "\"");
        }
    }

    double real(const std::string& key) const {
        auto s = str(key);
        try {
            std::size_t used = 0;
            auto v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("--" + dashed(key) + " must be a number, got \"" + s + "\"");
        }
    }

    fs::path out_dir() const {
        fs::path p = str("out");
        fs::create_directories(p);
        return p;
    }

    static std::string dashed(std::string key) {
        for (auto& c : key) {
            if (c == '_') c = '-';
        }
        return key;
    }
};

std::string file_sha256(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.string());
    out << text;
}

void write_json(const fs::path& p, const json& j) {
    write_text(p, j.dump(2) + "\n");
}

struct Outputs {
    std::vector<fs::path> files;
    void add(const fs::path& p) { files.push_back(p); }
};

// Config snapshot plus input/output checksums; no timestamps so reruns are
// byte-identical.
void write_manifest(const std::string& command, const RunConfig& cfg, const Outputs& outputs) {
    json config = json::object();
    for (const auto& [k, v] : defaults()) {
        if (!v.empty()) config[k] = v;
    }
    for (const auto& [k, v] : cfg.values) {
        if (k != "out") config[k] = v;
    }
    json inputs = json::object();
    for (const auto& key : path_keys()) {
        if (!cfg.has(key) || key == "cache") continue;
        fs::path p = cfg.values.at(key);
        if (fs::is_regular_file(p)) inputs[key] = {{"path", p.string()}, {"sha256", file_sha256(p)}};
    }
    json outs = json::object();
    for (const auto& f : outputs.files) outs[f.filename().string()] = file_sha256(f);
    json manifest = {{"artifact", "ratatool"}, {"version", kVersion}, {"command", command},
                     {"config", config},       {"inputs", inputs},    {"outputs", outs}};
    write_json(cfg.out_dir() / "manifest.json", manifest);
}

ToolCorpus load_corpus(const RunConfig& cfg) {
    auto p = cfg.path("corpus");
    ToolCorpus c{p.stem().string(), load_tools(p)};
    return c;
}

QuerySet load_query_set(const RunConfig& cfg) {
    auto p = cfg.path("queries");
    return QuerySet{p.stem().string(), load_queries(p)};
}

DescriptionFormat format_of(const RunConfig& cfg) {
    return parse_format(cfg.str("format"));
}

// Active embedding provider, optionally behind the cache.
struct ProviderStack {
    std::unique_ptr<EmbeddingProvider> base;
    std::unique_ptr<EmbeddingCache> cache;
    std::unique_ptr<CachedProvider> cached;

    EmbeddingProvider& get() { return cached ? static_cast<EmbeddingProvider&>(*cached) : *base; }
};

ProviderStack make_provider(const RunConfig& cfg) {
    ProviderStack s;
    auto kind = cfg.str("provider");
    if (kind == "local") {
        s.base = std::make_unique<LocalHashEmbedder>(cfg.u64("dim"));
    } else if (kind == "remote") {
        auto rc = RemoteEmbedConfig::from_env();
        if (cfg.has("embed_url")) rc.endpoint = cfg.str("embed_url");
        if (cfg.has("embed_model")) rc.model = cfg.str("embed_model");
        rc.parallelism = cfg.u64("parallelism");
        s.base = std::make_unique<RemoteEmbedder>(std::move(rc));
    } else {
        throw ConfigError("--provider must be local or remote, got \"" + kind + "\"");
    }
    if (cfg.has("cache")) {
        s.cache = std::make_unique<EmbeddingCache>(cfg.str("cache"));
        s.cached = std::make_unique<CachedProvider>(*s.base, *s.cache);
    }
    return s;
}

ToolIndex load_index(const RunConfig& cfg) {
    return ToolIndex::load(cfg.path("index"));
}

struct GeneratorStack {
    std::unique_ptr<ChatClient> client;
    std::unique_ptr<TaskGenerator> generator;
};

GeneratorStack make_generator(const RunConfig& cfg, const ToolCorpus* corpus, DecodingStrategy strategy) {
    GeneratorStack g;
    auto kind = cfg.str("generator");
    if (kind == "mock") {
        if (!corpus) throw ConfigError("--generator mock needs --corpus");
        g.generator = std::make_unique<MockGenerator>(*corpus, cfg.real("noise"), cfg.u64("seed"), format_of(cfg));
    } else if (kind == "remote") {
        auto rc = RemoteChatConfig::from_env();
        if (cfg.has("chat_url")) rc.endpoint = cfg.str("chat_url");
        if (cfg.has("chat_model")) rc.model = cfg.str("chat_model");
        g.client = std::make_unique<RemoteChatClient>(std::move(rc));
        std::optional<std::uint64_t> seed;
        if (cfg.has("seed")) seed = cfg.u64("seed");
        g.generator = std::make_unique<ChatGenerator>(*g.client, format_of(cfg), GenerationConfig::preset(strategy, seed));
    } else {
        throw ConfigError("--generator must be mock or remote, got \"" + kind + "\"");
    }
    return g;
}

std::vector<DecodingStrategy> strategies_of(const RunConfig& cfg) {
    auto s = cfg.str("strategy");
    if (s == "all") return {kAllStrategies.begin(), kAllStrategies.end()};
    try {
        return {parse_strategy(s)};
    } catch (const SchemaError&) {
        throw ConfigError("--strategy must be one of greedy, beam5, sample_t07, sample_t10, sample_beam3, all");
    }
}

// ---------------------------------------------------------------- commands

int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
    auto corpus = load_corpus(cfg);
    auto queries = load_query_set(cfg);
    auto result = clean(corpus, queries);
    auto dir = cfg.out_dir();
    Outputs o;
    save_tools(dir / "tools.jsonl", result.corpus.tools);
    o.add(dir / "tools.jsonl");
    save_queries(dir / "queries.jsonl", result.queries.queries);
    o.add(dir / "queries.jsonl");
    write_json(dir / "clean_report.json", result.report.to_json());
    o.add(dir / "clean_report.json");
    write_manifest("ingest", cfg, o);
    out << "tools: " << corpus.tools.size() << " -> " << result.corpus.tools.size() << "\n"
        << "queries: " << queries.queries.size() << " -> " << result.queries.queries.size() << "\n";
    return kExitOk;
}

int cmd_split(const RunConfig& cfg, std::ostream& out) {
    auto corpus = load_corpus(cfg);
    auto queries = load_query_set(cfg);
    auto split = split_tools(corpus, cfg.real("ratio"), cfg.u64("seed"));
    auto qs = split_queries(queries, split);
    auto dir = cfg.out_dir();
    Outputs o;
    write_json(dir / "split.json", split.to_json());
    o.add(dir / "split.json");
    std::vector<ToolDescription> train_tools, test_tools;
    for (const auto& t : corpus.tools) (split.is_train(t.tool_id) ? train_tools : test_tools).push_back(t);
    save_tools(dir / "train_tools.jsonl", train_tools);
    save_tools(dir / "test_tools.jsonl", test_tools);
    save_queries(dir / "train_queries.jsonl", qs.train.queries);
    save_queries(dir / "test_queries.jsonl", qs.test.queries);
    for (const char* f : {"train_tools.jsonl", "test_tools.jsonl", "train_queries.jsonl", "test_queries.jsonl"}) {
        o.add(dir / f);
    }
    write_manifest("split", cfg, o);
    out << "train tools: " << split.train_tool_ids.size() << ", test tools: " << split.test_tool_ids.size()
        << "\ntrain queries: " << qs.train.queries.size() << ", test queries: " << qs.test.queries.size() << "\n";
    return kExitOk;
}

int cmd_stats(const RunConfig& cfg, std::ostream& out) {
    auto corpus = load_corpus(cfg);
    auto queries = load_query_set(cfg);
    std::ifstream in(cfg.path("split"));
    auto split = SplitAssignment::from_json(json::parse(in, nullptr, true));
    auto s = stats(corpus, queries, split);
    auto dir = cfg.out_dir();
    Outputs o;
    write_json(dir / "stats.json", s.to_json());
    o.add(dir / "stats.json");
    write_manifest("stats", cfg, o);
    out << s.render_table();
    return kExitOk;
}

int cmd_build_index(const RunConfig& cfg, std::ostream& out) {
    auto corpus = load_corpus(cfg);
    auto provider = make_provider(cfg);
    auto index = build_index(corpus, provider.get(), format_of(cfg));
    auto dir = cfg.out_dir();
    Outputs o;
    index.save(dir / "index.jsonl");
    o.add(dir / "index.jsonl");
    write_manifest("build-index", cfg, o);
    out << "indexed " << index.size() << " tools (dim " << index.dim() << ", " << index.provenance().provider_id
        << "/" << index.provenance().model_id << ")\n";
    return kExitOk;
}

int cmd_describe(const RunConfig& cfg, std::ostream& out) {
    auto queries = load_query_set(cfg);
    std::optional<ToolCorpus> corpus;
    if (cfg.has("corpus")) corpus = load_corpus(cfg);
    std::vector<json> rows;
    std::size_t failures = 0;
    for (auto strategy : strategies_of(cfg)) {
        // Mock candidates differ per strategy through the seed.
        RunConfig scfg = cfg;
        if (cfg.str("generator") == "mock") {
            scfg.values["seed"] = std::to_string(cfg.u64("seed") + static_cast<std::uint64_t>(strategy));
        }
        auto gen = make_generator(scfg, corpus ? &*corpus : nullptr, strategy);
        std::vector<GenerationRecord> records(queries.queries.size());
        if (cfg.str("generator") == "remote") {
            GenerationConfig gc = GenerationConfig::preset(strategy, cfg.has("seed") ? std::optional(cfg.u64("seed")) : std::nullopt);
            records = describe_tasks(queries.queries, format_of(cfg), gc, *gen.client, cfg.u64("parallelism"));
        } else {
            for (std::size_t i = 0; i < records.size(); ++i) {
                records[i] = gen.generator->generate(queries.queries[i]);
                records[i].strategy = strategy;
                if (records[i].parsed) records[i].parsed->strategy = strategy;
            }
        }
        for (const auto& r : records) {
            if (r.parse_error) ++failures;
            rows.push_back(r.to_json());
        }
    }
    auto dir = cfg.out_dir();
    Outputs o;
    write_jsonl(dir / "generations.jsonl", rows);
    o.add(dir / "generations.jsonl");
    write_manifest("describe", cfg, o);
    out << "generated " << rows.size() << " descriptions (" << failures << " unparseable)\n";
    return kExitOk;
}

int cmd_select(const RunConfig& cfg, std::ostream& out) {
    auto index = load_index(cfg);
    auto provider = make_provider(cfg);
    check_provenance(index, provider.get(), index.provenance().format);
    auto k = cfg.u64("k");
    std::vector<json> rows;
    for (const auto& j : read_jsonl(cfg.path("input"))) {
        auto rec = GenerationRecord::from_json(j);
        json row = {{"query_id", rec.query_id}, {"strategy", to_string(rec.strategy)}};
        if (!rec.parsed) {
            row["error"] = *rec.parse_error;
        } else {
            auto res = select_tool(*rec.parsed, index, provider.get(), k);
            row["selected"] = res.selected();
            json ranking = json::array();
            for (const auto& s : res.ranking) ranking.push_back({{"tool_id", s.tool_id}, {"score", s.score}});
            row["ranking"] = ranking;
        }
        rows.push_back(std::move(row));
    }
    auto dir = cfg.out_dir();
    Outputs o;
    write_jsonl(dir / "selections.jsonl", rows);
    o.add(dir / "selections.jsonl");
    write_manifest("select", cfg, o);
    out << "selected tools for " << rows.size() << " task descriptions\n";
    return kExitOk;
}

int cmd_evaluate(const RunConfig& run_cfg, std::ostream& out) {
    auto index = load_index(run_cfg);
    RunConfig cfg = run_cfg;
    if (!cfg.has("format")) cfg.values["format"] = std::string(to_string(index.provenance().format));
    auto provider = make_provider(cfg);
    check_provenance(index, provider.get(), format_of(cfg));
    auto queries = load_query_set(cfg);
    std::optional<ToolCorpus> corpus;
    if (cfg.has("corpus")) corpus = load_corpus(cfg);
    auto strategies = strategies_of(cfg);
    if (strategies.size() != 1) throw ConfigError("evaluate takes a single --strategy");
    auto gen = make_generator(cfg, corpus ? &*corpus : nullptr, strategies.front());
    auto result = evaluate(queries.queries, *gen.generator, index, provider.get(), cfg.u64("parallelism"));
    auto dir = cfg.out_dir();
    Outputs o;
    std::vector<json> rows;
    for (const auto& it : result.items) rows.push_back(it.to_json());
    write_jsonl(dir / "eval_items.jsonl", rows);
    o.add(dir / "eval_items.jsonl");
    write_json(dir / "eval_report.json", result.report.to_json());
    o.add(dir / "eval_report.json");
    write_manifest("evaluate", cfg, o);
    out << result.report.render_table();
    return kExitOk;
}

int cmd_prefgen(const RunConfig& cfg, std::ostream& out) {
    auto index = load_index(cfg);
    auto provider = make_provider(cfg);
    check_provenance(index, provider.get(), index.provenance().format);
    auto queries = load_query_set(cfg);
    std::vector<GenerationRecord> records;
    for (const auto& j : read_jsonl(cfg.path("input"))) records.push_back(GenerationRecord::from_json(j));
    auto sets = group_candidates(records, queries.queries);
    double frac = cfg.has("eval_fraction") ? cfg.real("eval_fraction") : kDefaultEvalFraction;
    auto ds = build_dataset(sets, index, provider.get(), cfg.u64("seed"), frac, cfg.u64("parallelism"));
    auto dir = cfg.out_dir();
    Outputs o;
    auto dump_pairs = [&](const char* name, const std::vector<PreferencePair>& pairs) {
        std::vector<json> rows;
        for (const auto& p : pairs) rows.push_back(p.to_json());
        write_jsonl(dir / name, rows);
        o.add(dir / name);
    };
    dump_pairs("pref_train.jsonl", ds.train);
    dump_pairs("pref_eval.jsonl", ds.eval);
    write_json(dir / "pref_report.json", ds.report.to_json());
    o.add(dir / "pref_report.json");
    write_manifest("prefgen", cfg, o);
    out << "pairs: " << ds.report.pairs_emitted << " (train " << ds.train.size() << ", eval " << ds.eval.size()
        << "); discarded all-equal " << ds.report.sets_discarded_all_equal << ", parse failures "
        << ds.report.sets_discarded_parse_failures << "\n";
    return kExitOk;
}

int cmd_dpo_report(const RunConfig& cfg, std::ostream& out) {
    std::vector<DpoExample> examples;
    for (const auto& j : read_jsonl(cfg.path("input"))) examples.push_back(DpoExample::from_json(j));
    DpoConfig dc{cfg.real("beta")};
    auto report = batch_dpo_report(examples, dc);
    auto dir = cfg.out_dir();
    Outputs o;
    write_json(dir / "dpo_report.json", report.to_json());
    o.add(dir / "dpo_report.json");
    write_manifest("dpo-report", cfg, o);
    out << report.to_json().dump(2) << "\n";
    return kExitOk;
}

}  // namespace

std::map<std::string, std::string> read_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        auto key = trim(t.substr(0, eq));
        for (auto& c : key) {
            if (c == '-') c = '_';
        }
        if (looks_secret(key)) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": secrets (\"" + key +
                              "\") belong in environment variables, not config files");
        }
        kv[key] = trim(t.substr(eq + 1));
    }
    return kv;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"ratatool: retrieval-based tool selection pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // Flag storage, shared across subcommands.
    std::map<std::string, std::string> flag_values;
    std::map<std::string, CLI::Option*> flag_opts;
    std::string config_path;

    struct Cmd {
        const char* name;
        const char* help;
        std::vector<std::string> keys;
        std::function<int(const RunConfig&, std::ostream&)> fn;
    };
    const std::vector<Cmd> commands = {
        {"ingest", "validate and clean a tool corpus and query set", {"corpus", "queries", "out"}, cmd_ingest},
        {"split", "tool-level split preserving modality distribution",
         {"corpus", "queries", "ratio", "seed", "out"}, cmd_split},
        {"stats", "dataset statistics table", {"corpus", "queries", "split", "out"}, cmd_stats},
        {"build-index", "embed tool descriptions into an index",
         {"corpus", "provider", "dim", "format", "cache", "embed_url", "embed_model", "parallelism", "out"},
         cmd_build_index},
        {"describe", "generate task descriptions for queries",
         {"queries", "corpus", "generator", "noise", "seed", "strategy", "format", "chat_url", "chat_model",
          "parallelism", "out"},
         cmd_describe},
        {"select", "select tools for generated task descriptions",
         {"index", "input", "provider", "dim", "k", "cache", "embed_url", "embed_model", "parallelism", "out"},
         cmd_select},
        {"evaluate", "generate, retrieve and score a query set",
         {"index", "queries", "corpus", "provider", "dim", "format", "generator", "noise", "seed", "strategy",
          "cache", "embed_url", "embed_model", "chat_url", "chat_model", "parallelism", "out"},
         cmd_evaluate},
        {"prefgen", "build DPO preference pairs from candidate generations",
         {"index", "queries", "input", "provider", "dim", "seed", "eval_fraction", "cache", "embed_url",
          "embed_model", "parallelism", "out"},
         cmd_prefgen},
        {"dpo-report", "DPO loss summary over supplied log-probabilities", {"input", "beta", "out"}, cmd_dpo_report},
    };

    std::map<CLI::App*, const Cmd*> by_app;
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config_path, "key = value config file; flags override it");
        for (const auto& key : c.keys) {
            auto flag = "--" + RunConfig::dashed(key);
            auto* opt = sub->add_option(flag, flag_values[key]);
            if (auto d = defaults().find(key); d != defaults().end() && !d->second.empty()) {
                opt->description("default: " + d->second);
            }
        }
        by_app[sub] = &c;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg;
        app.exit(e, msg, msg);
        err << "ratatool: usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    CLI::App* active = app.get_subcommands().front();
    const Cmd* cmd = by_app.at(active);
    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg.values = read_config_file(config_path);
        for (const auto& key : cmd->keys) {
            if (active->count("--" + RunConfig::dashed(key)) > 0) cfg.values[key] = flag_values[key];
        }
        if (!cfg.has("out")) throw ConfigError("missing required setting --out");
        return cmd->fn(cfg, out);
    } catch (const Error& e) {
        err << "ratatool: error: " << e.what() << "\n";
        switch (e.category()) {
            case ErrorCategory::Config: return kExitUsage;
            case ErrorCategory::Data: return kExitData;
            case ErrorCategory::Remote: return kExitRemote;
        }
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        err << "ratatool: error: " << e.what() << "\n";
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "ratatool: error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace ratatool::cli
