#include "stub_server.hpp"

#include <mutex>
#include <stdexcept>
#include <thread>

#include <httplib.h>

namespace ratatool::testing {

std::string StubRequest::header(const std::string& name) const {
    auto it = headers.find(name);
    return it == headers.end() ? std::string() : it->second;
}

struct StubServer::Impl {
    httplib::Server server;
    std::thread thread;
    mutable std::mutex mutex;
    std::vector<StubRequest> log;

    httplib::Server::Handler wrap(std::string method, Handler h) {
        return [this, method, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
            StubRequest r{method, req.path, req.body, {}};
            for (const auto& [k, v] : req.headers) r.headers.emplace(k, v);
            {
                std::lock_guard lock(mutex);
                log.push_back(r);
            }
            auto reply = h(r);
            res.status = reply.status;
            res.set_content(reply.body, reply.content_type);
        };
    }
};

StubServer::StubServer() : impl_(std::make_unique<Impl>()) {}

StubServer::~StubServer() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void StubServer::on_get(const std::string& pattern, Handler h) {
    impl_->server.Get(pattern, impl_->wrap("GET", std::move(h)));
}

void StubServer::on_post(const std::string& pattern, Handler h) {
    impl_->server.Post(pattern, impl_->wrap("POST", std::move(h)));
}

void StubServer::start() {
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("stub server could not bind");
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

std::string StubServer::base_url() const {
    return "http://127.0.0.1:" + std::to_string(port_);
}

std::vector<StubRequest> StubServer::requests() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->log;
}

std::size_t StubServer::request_count() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->log.size();
}

}  // namespace ratatool::testing
