#include "ratatool/align.hpp"

#include <cmath>

#include "ratatool/errors.hpp"

namespace ratatool {

using nlohmann::json;

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) throw InvalidLogProb(std::string(name) + " is not finite");
}

void check(const DpoExample& ex) {
    require_finite(ex.policy_logp_w, "policy_logp_w");
    require_finite(ex.ref_logp_w, "ref_logp_w");
    require_finite(ex.policy_logp_l, "policy_logp_l");
    require_finite(ex.ref_logp_l, "ref_logp_l");
}

}  // namespace

DpoExample DpoExample::from_json(const json& j) {
    DpoExample ex;
    try {
        ex.query_id = j.value("query_id", "");
        ex.policy_logp_w = j.at("policy_logp_w").get<double>();
        ex.ref_logp_w = j.at("ref_logp_w").get<double>();
        ex.policy_logp_l = j.at("policy_logp_l").get<double>();
        ex.ref_logp_l = j.at("ref_logp_l").get<double>();
    } catch (const json::exception& e) {
        throw InvalidLogProb(std::string("malformed DPO example: ") + e.what());
    }
    check(ex);
    return ex;
}

void DpoConfig::validate() const {
    if (!std::isfinite(beta) || !(beta > 0.0)) throw ConfigError("dpo beta must be finite and positive");
}

double sft_loss(std::span<const double> token_logps) {
    if (token_logps.empty()) throw InvalidLogProb("empty token sequence");
    double sum = 0.0;
    for (double lp : token_logps) {
        if (!std::isfinite(lp) || lp > 0.0) throw InvalidLogProb("token log-probability must be finite and <= 0");
        sum += lp;
    }
    return -sum;
}

double dpo_margin(const DpoExample& ex, const DpoConfig& cfg) {
    cfg.validate();
    check(ex);
    return cfg.beta * ((ex.policy_logp_w - ex.ref_logp_w) - (ex.policy_logp_l - ex.ref_logp_l));
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double dpo_loss_from_margin(double margin) {
    return softplus(-margin);
}

double dpo_loss(const DpoExample& ex, const DpoConfig& cfg) {
    return dpo_loss_from_margin(dpo_margin(ex, cfg));
}

double dpo_loss_grad_wrt_margin(double margin) {
    // sigma(m) - 1 == -sigma(-m), which keeps full precision for large m.
    return -sigmoid(-margin);
}

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    auto half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

json DpoReport::to_json() const {
    return {{"count", count},
            {"beta", beta},
            {"mean_loss", mean_loss},
            {"mean_margin", mean_margin},
            {"implicit_accuracy", implicit_accuracy}};
}

DpoReport batch_dpo_report(std::span<const DpoExample> examples, const DpoConfig& cfg) {
    if (examples.empty()) throw EmptyBatch();
    cfg.validate();
    std::vector<double> losses, margins;
    losses.reserve(examples.size());
    margins.reserve(examples.size());
    std::size_t positive = 0;
    for (const auto& ex : examples) {
        auto m = dpo_margin(ex, cfg);
        margins.push_back(m);
        losses.push_back(dpo_loss_from_margin(m));
        if (m > 0.0) ++positive;
    }
    auto n = static_cast<double>(examples.size());
    DpoReport r;
    r.count = examples.size();
    r.beta = cfg.beta;
    r.mean_loss = pairwise_sum(losses) / n;
    r.mean_margin = pairwise_sum(margins) / n;
    r.implicit_accuracy = static_cast<double>(positive) / n;
    return r;
}

}  // namespace ratatool
