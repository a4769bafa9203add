#include "ratatool/embed.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "ratatool/errors.hpp"
#include "ratatool/parallel.hpp"
#include "ratatool/rng.hpp"

namespace ratatool {

using nlohmann::json;

bool normalize(std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm)) return false;
    for (auto& x : v) x /= norm;
    return true;
}

EmbeddingVector EmbeddingProvider::embed_one(const std::string& text) {
    std::string one[] = {text};
    auto out = embed(one);
    return std::move(out.at(0));
}

namespace {

bool is_token_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

std::vector<double> hash_embed(std::string_view text, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        auto h = fnv1a64(token);
        double sign = ((h >> 32) & 1U) == 0 ? 1.0 : -1.0;
        v[h % dim] += sign;
        token.clear();
    };
    for (unsigned char c : text) {
        if (is_token_byte(c)) {
            if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
            token.push_back(static_cast<char>(c));
        } else {
            flush();
        }
    }
    flush();
    if (!normalize(v)) {
        std::fill(v.begin(), v.end(), 0.0);
        v[0] = 1.0;
    }
    return v;
}

std::vector<EmbeddingVector> embed_local(std::span<const std::string> texts, std::size_t dim) {
    LocalHashEmbedder e(dim);
    return e.embed(texts);
}

LocalHashEmbedder::LocalHashEmbedder(std::size_t dim) : dim_(dim) {
    if (dim < 8) throw ConfigError("local embedder dimension must be at least 8");
}

std::string LocalHashEmbedder::model_id() const {
    return "fnv1a-signed-" + std::to_string(dim_);
}

std::vector<EmbeddingVector> LocalHashEmbedder::embed(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back({hash_embed(t, dim_), provider_id(), model_id()});
    return out;
}

RemoteEmbedConfig RemoteEmbedConfig::from_env() {
    RemoteEmbedConfig c;
    if (const char* v = std::getenv("RATATOOL_EMBED_URL")) c.endpoint = v;
    if (const char* v = std::getenv("RATATOOL_EMBED_MODEL")) c.model = v;
    if (const char* v = std::getenv("RATATOOL_EMBED_TOKEN")) c.token = v;
    return c;
}

RemoteEmbedder::RemoteEmbedder(RemoteEmbedConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ConfigError("remote embedder needs an endpoint (RATATOOL_EMBED_URL)");
    if (config_.model.empty()) throw ConfigError("remote embedder needs a model id (RATATOOL_EMBED_MODEL)");
    if (config_.max_batch == 0) throw ConfigError("embedding batch size must be positive");
    http::parse_url(config_.endpoint);
}

std::vector<EmbeddingVector> RemoteEmbedder::embed(std::span<const std::string> texts) {
    if (texts.empty()) return {};
    for (const auto& t : texts) {
        if (t.empty()) throw DataError("embedding request contains an empty text");
    }
    const auto batch = config_.max_batch;
    const auto n_batches = (texts.size() + batch - 1) / batch;
    std::vector<std::vector<EmbeddingVector>> results(n_batches);
    parallel_for(n_batches, config_.parallelism, [&](std::size_t b) {
        auto begin = b * batch;
        auto count = std::min(batch, texts.size() - begin);
        results[b] = embed_batch(texts.subspan(begin, count));
    });
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (auto& r : results) {
        for (auto& v : r) {
            if (!out.empty() && v.dim() != out.front().dim()) throw DimensionMismatch(out.front().dim(), v.dim());
            out.push_back(std::move(v));
        }
    }
    return out;
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) {
    json req = {{"model", config_.model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    auto body = req.dump(-1, ' ', false, json::error_handler_t::replace);
    http::Headers headers;
    if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);

    http::Response res;
    bool ok = http::with_retry(config_.retry, [&] {
        res = http::post_json(config_.endpoint, body, headers);
        if (res.status >= 200 && res.status < 300) return true;
        if (http::is_transient(res.status)) return false;
        throw ApiError(res.status, res.body.substr(0, 200));
    });
    if (!ok) throw ApiError(res.status, res.body.substr(0, 200));

    std::vector<EmbeddingVector> out(texts.size());
    std::vector<bool> seen(texts.size(), false);
    try {
        auto j = json::parse(res.body);
        const auto& data = j.at("data");
        if (!data.is_array() || data.size() != texts.size()) {
            throw ApiError(res.status, "expected " + std::to_string(texts.size()) + " embeddings");
        }
        for (std::size_t pos = 0; pos < data.size(); ++pos) {
            const auto& item = data[pos];
            auto idx = item.contains("index") ? item.at("index").get<std::size_t>() : pos;
            if (idx >= texts.size() || seen[idx]) throw ApiError(res.status, "bad embedding index");
            seen[idx] = true;
            auto values = item.at("embedding").get<std::vector<double>>();
            if (values.empty()) throw ApiError(res.status, "empty embedding");
            for (double x : values) {
                if (!std::isfinite(x)) throw ApiError(res.status, "non-finite embedding component");
            }
            if (!normalize(values)) throw ApiError(res.status, "zero-norm embedding");
            out[idx] = {std::move(values), provider_id(), model_id()};
        }
    } catch (const json::exception& e) {
        throw ApiError(res.status, std::string("malformed response: ") + e.what());
    }
    for (const auto& v : out) {
        if (v.dim() != out.front().dim()) throw DimensionMismatch(out.front().dim(), v.dim());
    }
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string cache_key(const std::string& provider_id, const std::string& model_id, const std::string& text) {
    std::string material;
    material.reserve(provider_id.size() + model_id.size() + text.size() + 2);
    material += provider_id;
    material += '\x1f';
    material += model_id;
    material += '\x1f';
    material += text;
    return sha256_hex(material);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
        std::ifstream in(path_);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                auto j = json::parse(line);
                EmbeddingVector v{j.at("values").get<std::vector<double>>(),
                                  j.at("provider_id").get<std::string>(), j.at("model_id").get<std::string>()};
                if (v.dim() != j.at("dim").get<std::size_t>()) throw CacheCorruption(lineno, "dim field disagrees");
                entries_[j.at("key").get<std::string>()] = std::move(v);
            } catch (const json::exception& e) {
                throw CacheCorruption(lineno, e.what());
            }
        }
    } else if (path_.has_parent_path()) {
        std::filesystem::create_directories(path_.parent_path());
    }
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw DataError("cannot open embedding cache " + path_.string() + " for writing");
}

std::size_t EmbeddingCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void EmbeddingCache::append(const std::string& key, const EmbeddingVector& v) {
    std::string line = "{\"key\":\"" + key + "\",\"dim\":" + std::to_string(v.dim()) + ",\"values\":[";
    for (std::size_t i = 0; i < v.values.size(); ++i) {
        if (i) line += ',';
        line += format_double(v.values[i]);
    }
    line += "],\"provider_id\":" + json(v.provider_id).dump() + ",\"model_id\":" + json(v.model_id).dump() + "}\n";
    out_ << line;
    out_.flush();
}

EmbeddingVector EmbeddingCache::get_or_embed(const std::string& text, EmbeddingProvider& provider) {
    std::string one[] = {text};
    return std::move(get_or_embed(one, provider).at(0));
}

std::vector<EmbeddingVector> EmbeddingCache::get_or_embed(std::span<const std::string> texts,
                                                          EmbeddingProvider& provider) {
    const auto pid = provider.provider_id();
    const auto mid = provider.model_id();
    std::vector<std::string> keys;
    keys.reserve(texts.size());
    for (const auto& t : texts) keys.push_back(cache_key(pid, mid, t));

    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::size_t> miss_idx;
    std::vector<std::string> miss_text;
    {
        std::lock_guard lock(mutex_);
        std::unordered_map<std::string, std::size_t> pending;  // dedupe misses within the batch
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (auto it = entries_.find(keys[i]); it != entries_.end()) {
                out[i] = it->second;
            } else if (!pending.count(keys[i])) {
                pending[keys[i]] = miss_text.size();
                miss_idx.push_back(i);
                miss_text.push_back(texts[i]);
            }
        }
    }
    if (!miss_text.empty()) {
        auto fresh = provider.embed(miss_text);
        if (fresh.size() != miss_text.size()) throw DataError("provider returned the wrong number of vectors");
        std::lock_guard lock(mutex_);
        for (std::size_t m = 0; m < miss_idx.size(); ++m) {
            const auto& key = keys[miss_idx[m]];
            if (entries_.emplace(key, fresh[m]).second) append(key, fresh[m]);
        }
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (out[i].values.empty()) out[i] = entries_.at(keys[i]);
        }
    }
    return out;
}

}  // namespace ratatool
