#pragma once

// The embedding function behind a provider abstraction: a remote API client,
// a deterministic local hashing embedder, and a content-addressed cache.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ratatool/http.hpp"

namespace ratatool {

struct EmbeddingVector {
    std::vector<double> values;
    std::string provider_id;
    std::string model_id;

    std::size_t dim() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

/// Scales v to unit L2 norm in place. Returns false (leaving v untouched) if
/// the norm is zero or not finite.
bool normalize(std::vector<double>& v);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::string provider_id() const = 0;
    virtual std::string model_id() const = 0;

    /// One vector per text, in order, all sharing one dimension.
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;

    EmbeddingVector embed_one(const std::string& text);
};

/// Signed feature hashing: ASCII-lowercase, split on runs of ASCII
/// non-alphanumerics, FNV-1a 64 per token, bucket = h mod dim, sign from bit 32.
/// The result is L2-normalized; an all-zero accumulator maps to e0.
std::vector<double> hash_embed(std::string_view text, std::size_t dim);

std::vector<EmbeddingVector> embed_local(std::span<const std::string> texts, std::size_t dim);

class LocalHashEmbedder final : public EmbeddingProvider {
public:
    /// dim must be at least 8.
    explicit LocalHashEmbedder(std::size_t dim);

    std::string provider_id() const override { return "local-hash"; }
    std::string model_id() const override;
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

    std::size_t dim() const { return dim_; }

private:
    std::size_t dim_;
};

struct RemoteEmbedConfig {
    std::string endpoint;
    std::string model;
    std::string token;  // bearer token; empty means no auth header
    std::size_t max_batch = 64;
    std::size_t parallelism = 4;
    http::RetryPolicy retry;

    /// Reads RATATOOL_EMBED_URL, RATATOOL_EMBED_MODEL and RATATOOL_EMBED_TOKEN.
    static RemoteEmbedConfig from_env();
};

/// Client for POST {"model", "input": [...]} -> {"data": [{"index", "embedding"}]}.
/// Vectors are L2-normalized on receipt.
class RemoteEmbedder final : public EmbeddingProvider {
public:
    explicit RemoteEmbedder(RemoteEmbedConfig config);

    std::string provider_id() const override { return "remote:" + config_.endpoint; }
    std::string model_id() const override { return config_.model; }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

private:
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts);

    RemoteEmbedConfig config_;
};

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 hex of provider_id 0x1F model_id 0x1F text.
std::string cache_key(const std::string& provider_id, const std::string& model_id,
                      const std::string& text);

/// Append-only JSONL cache {key, dim, values, provider_id, model_id}.
/// The file is read once on open; new entries are appended under a lock.
class EmbeddingCache {
public:
    /// Throws CacheCorruption naming the first unparseable line.
    explicit EmbeddingCache(std::filesystem::path path);

    EmbeddingVector get_or_embed(const std::string& text, EmbeddingProvider& provider);

    /// Batch form: misses are embedded in a single provider call.
    std::vector<EmbeddingVector> get_or_embed(std::span<const std::string> texts,
                                              EmbeddingProvider& provider);

    std::size_t size() const;
    const std::filesystem::path& path() const { return path_; }

private:
    void append(const std::string& key, const EmbeddingVector& v);

    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> entries_;
    std::ofstream out_;
};

/// Provider decorator that routes every request through a cache.
class CachedProvider final : public EmbeddingProvider {
public:
    CachedProvider(EmbeddingProvider& inner, EmbeddingCache& cache) : inner_(inner), cache_(cache) {}

    std::string provider_id() const override { return inner_.provider_id(); }
    std::string model_id() const override { return inner_.model_id(); }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        return cache_.get_or_embed(texts, inner_);
    }

private:
    EmbeddingProvider& inner_;
    EmbeddingCache& cache_;
};

/// "%.17g" rendering; parses back to the identical double.
std::string format_double(double v);

}  // namespace ratatool
