#include "ratatool/http.hpp"

#include <thread>

#include <httplib.h>

#include "ratatool/errors.hpp"

namespace ratatool::http {

std::string Url::origin() const {
    return scheme + "://" + host + ":" + std::to_string(port);
}

Url parse_url(const std::string& url) {
    Url u;
    auto sep = url.find("://");
    if (sep == std::string::npos) throw ConfigError("not an absolute URL: \"" + url + "\"");
    u.scheme = url.substr(0, sep);
    if (u.scheme != "http" && u.scheme != "https") {
        throw ConfigError("unsupported URL scheme \"" + u.scheme + "\"");
    }
    auto rest = url.substr(sep + 3);
    auto slash = rest.find('/');
    auto authority = rest.substr(0, slash);
    u.path = slash == std::string::npos ? "/" : rest.substr(slash);
    auto colon = authority.rfind(':');
    if (colon != std::string::npos && authority.find(']') == std::string::npos) {
        u.host = authority.substr(0, colon);
        try {
            u.port = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad port in URL \"" + url + "\"");
        }
    } else {
        u.host = authority;
        u.port = u.scheme == "https" ? 443 : 80;
    }
    if (u.host.empty()) throw ConfigError("missing host in URL \"" + url + "\"");
    return u;
}

namespace {

template <typename Call>
Response perform(const std::string& url, std::chrono::seconds timeout, Call&& call) {
    auto u = parse_url(url);
    httplib::Client client(u.origin());
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = call(client, u.path);
    if (!res) {
        throw NetworkError("request to " + url + " failed: " + httplib::to_string(res.error()));
    }
    return Response{res->status, res->body};
}

httplib::Headers to_httplib(const Headers& headers) {
    return httplib::Headers(headers.begin(), headers.end());
}

}  // namespace

Response get(const std::string& url, const Headers& headers, std::chrono::seconds timeout) {
    return perform(url, timeout, [&](httplib::Client& c, const std::string& path) {
        return c.Get(path, to_httplib(headers));
    });
}

Response post_json(const std::string& url, const std::string& body, const Headers& headers,
                   std::chrono::seconds timeout) {
    return perform(url, timeout, [&](httplib::Client& c, const std::string& path) {
        return c.Post(path, to_httplib(headers), body, "application/json");
    });
}

bool is_transient(int status) {
    return status == 429 || status >= 500;
}

bool with_retry(const RetryPolicy& policy, const std::function<bool()>& attempt) {
    auto delay = policy.base_delay;
    for (int i = 0; i < policy.attempts; ++i) {
        bool last = i + 1 == policy.attempts;
        try {
            if (attempt()) return true;
        } catch (const NetworkError&) {
            if (last) throw;
        }
        if (!last) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
    }
    return false;
}

}  // namespace ratatool::http
