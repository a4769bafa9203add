#pragma once

// Reference evaluations of the supervised (token cross-entropy) and direct
// preference optimization objectives over supplied natural-log probabilities.

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ratatool {

struct DpoExample {
    std::string query_id;
    double policy_logp_w = 0.0;  // log pi_theta(y_w | q), summed over tokens
    double ref_logp_w = 0.0;
    double policy_logp_l = 0.0;
    double ref_logp_l = 0.0;

    static DpoExample from_json(const nlohmann::json& j);
};

struct DpoConfig {
    double beta = 0.1;

    /// Throws ConfigError unless beta is finite and positive.
    void validate() const;
};

/// -sum(token_logps). Throws InvalidLogProb on empty input or any entry that
/// is positive or non-finite.
double sft_loss(std::span<const double> token_logps);

/// beta * ((policy_w - ref_w) - (policy_l - ref_l)).
double dpo_margin(const DpoExample& ex, const DpoConfig& cfg);

/// log(1 + e^x) without overflow.
double softplus(double x);

double sigmoid(double x);

/// -log sigmoid(margin) = softplus(-margin).
double dpo_loss_from_margin(double margin);
double dpo_loss(const DpoExample& ex, const DpoConfig& cfg);

/// d/dm [-log sigmoid(m)] = sigmoid(m) - 1.
double dpo_loss_grad_wrt_margin(double margin);

struct DpoReport {
    std::size_t count = 0;
    double mean_loss = 0.0;
    double mean_margin = 0.0;
    double implicit_accuracy = 0.0;  // fraction with margin > 0
    double beta = 0.1;

    nlohmann::json to_json() const;
};

/// Throws EmptyBatch. Sums are pairwise, so the result does not depend on
/// how the batch is chunked.
DpoReport batch_dpo_report(std::span<const DpoExample> examples, const DpoConfig& cfg);

/// Pairwise (cascade) summation.
double pairwise_sum(std::span<const double> values);

}  // namespace ratatool
