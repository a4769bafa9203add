#pragma once

// Minimal HTTP plumbing shared by the remote clients.

#include <chrono>
#include <functional>
#include <map>
#include <string>

namespace ratatool::http {

struct Url {
    std::string scheme;  // http or https
    std::string host;
    int port = 0;
    std::string path;  // always starts with '/'

    std::string origin() const;
};

/// Throws ConfigError on anything that is not an absolute http(s) URL.
Url parse_url(const std::string& url);

struct Response {
    int status = 0;
    std::string body;
};

using Headers = std::multimap<std::string, std::string>;

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds base_delay{500};
};

/// Transport failures throw NetworkError; any HTTP status is returned.
Response get(const std::string& url, const Headers& headers = {},
             std::chrono::seconds timeout = std::chrono::seconds(60));
Response post_json(const std::string& url, const std::string& body, const Headers& headers = {},
                   std::chrono::seconds timeout = std::chrono::seconds(120));

/// True for statuses worth retrying (429 and 5xx).
bool is_transient(int status);

/// Calls `attempt` up to policy.attempts times, sleeping base * 2^k between
/// tries. `attempt` returns true on success, false on a transient failure;
/// permanent failures should throw. Returns false when attempts run out.
bool with_retry(const RetryPolicy& policy, const std::function<bool()>& attempt);

}  // namespace ratatool::http
