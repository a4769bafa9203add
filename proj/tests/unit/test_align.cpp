#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "ratatool/align.hpp"
#include "ratatool/errors.hpp"

using namespace ratatool;

namespace {

// Reference values from tests/oracles/dpo_oracle.py (mpmath, 50 digits).
constexpr double kLn2 = 0.69314718055994530942;
constexpr double kSoftplusMinus03 = 0.55435524446852711881;
constexpr double kSoftplusMinus50 = 1.928749847963917783e-22;
constexpr double kSoftplusMinus37_5 = 5.1755550058018684009e-17;

DpoExample ex(double pw, double rw, double pl, double rl) { return {"q", pw, rw, pl, rl}; }

}  // namespace

TEST(SftLoss, Values) {
    std::vector<double> lp = {std::log(0.5), std::log(0.25)};
    EXPECT_NEAR(sft_loss(lp), 2.0794415416798357, 1e-12);
    std::vector<double> one = {0.0};
    EXPECT_EQ(sft_loss(one), 0.0);
}

TEST(SftLoss, Additive) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 0.0);
    std::vector<double> a(7), b(11);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    auto ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    EXPECT_NEAR(sft_loss(ab), sft_loss(a) + sft_loss(b), 1e-12);
    EXPECT_GE(sft_loss(a), 0.0);
}

TEST(SftLoss, RejectsInvalid) {
    std::vector<double> empty;
    EXPECT_THROW(sft_loss(empty), InvalidLogProb);
    std::vector<double> pos = {-1.0, 0.1};
    EXPECT_THROW(sft_loss(pos), InvalidLogProb);
    std::vector<double> nan = {std::nan("")};
    EXPECT_THROW(sft_loss(nan), InvalidLogProb);
}

TEST(DpoMargin, Arithmetic) {
    DpoConfig cfg;
    EXPECT_EQ(dpo_margin(ex(-3, -3, -7, -7), cfg), 0.0);
    EXPECT_NEAR(dpo_margin(ex(-1, -3, -5, -4), cfg), 0.3, 1e-15);
    DpoConfig twice{0.2};
    EXPECT_NEAR(dpo_margin(ex(-1, -3, -5, -4), twice), 2 * dpo_margin(ex(-1, -3, -5, -4), cfg), 1e-15);
    EXPECT_THROW(dpo_margin(ex(std::numeric_limits<double>::infinity(), 0, 0, 0), cfg), InvalidLogProb);
    EXPECT_THROW(DpoConfig{0.0}.validate(), ConfigError);
    EXPECT_THROW(DpoConfig{-1.0}.validate(), ConfigError);
}

TEST(DpoLoss, ClosedForms) {
    EXPECT_NEAR(dpo_loss_from_margin(0.0), kLn2, 1e-12);
    EXPECT_NEAR(dpo_loss_from_margin(0.3), kSoftplusMinus03, 1e-12);
    EXPECT_NEAR(dpo_loss_from_margin(0.3), 0.554355, 1e-6);
    EXPECT_NEAR(dpo_loss_from_margin(-50.0), 50.0, 1e-12);
    EXPECT_NEAR(dpo_loss_from_margin(50.0), kSoftplusMinus50, 1e-30);
    EXPECT_NEAR(dpo_loss_from_margin(37.5) / kSoftplusMinus37_5, 1.0, 1e-12);
    EXPECT_TRUE(std::isfinite(dpo_loss_from_margin(-800.0)));
    EXPECT_EQ(dpo_loss_from_margin(-800.0), 800.0);
    EXPECT_GE(dpo_loss_from_margin(800.0), 0.0);
}

TEST(DpoLoss, OracleExamples) {
    EXPECT_NEAR(dpo_loss(ex(-12.5, -13.0, -20.0, -18.0), {0.1}), 0.57593941987884356221, 1e-12);
    EXPECT_NEAR(dpo_loss(ex(-1.0, -4.0, -9.0, -2.0), {0.1}), 0.31326168751822283405, 1e-12);
    EXPECT_NEAR(dpo_loss(ex(-100.0, -1.0, -1.0, -100.0), {2.0}), 396.0, 1e-9);
    EXPECT_NEAR(dpo_loss_grad_wrt_margin(0.25), -0.43782349911420189597, 1e-12);
    EXPECT_NEAR(dpo_loss_grad_wrt_margin(1.0), -0.26894142136999512075, 1e-12);
}

TEST(DpoLoss, StrictlyDecreasing) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    std::vector<double> ms(500);
    for (auto& m : ms) m = u(rng);
    std::sort(ms.begin(), ms.end());
    ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
    for (std::size_t i = 1; i < ms.size(); ++i) EXPECT_LT(dpo_loss_from_margin(ms[i]), dpo_loss_from_margin(ms[i - 1]));
}

TEST(DpoLoss, SymmetricSumBound) {
    EXPECT_NEAR(dpo_loss_from_margin(0.0) * 2, 2 * kLn2, 1e-15);
    for (double m : {1e-3, 0.1, 0.5, 1.0, 3.0, 10.0, 40.0}) {
        EXPECT_GT(dpo_loss_from_margin(m) + dpo_loss_from_margin(-m), 2 * kLn2);
    }
}

TEST(DpoGrad, MatchesFiniteDifferences) {
    const double h = 1e-5;
    for (double m : {-5.0, -1.0, 0.0, 1.0, 5.0}) {
        double fd = (dpo_loss_from_margin(m + h) - dpo_loss_from_margin(m - h)) / (2 * h);
        EXPECT_NEAR(dpo_loss_grad_wrt_margin(m), fd, 1e-6) << m;
    }
    EXPECT_EQ(dpo_loss_grad_wrt_margin(0.0), -0.5);
    EXPECT_LT(dpo_loss_grad_wrt_margin(40.0), 0.0);
    EXPECT_GT(dpo_loss_grad_wrt_margin(40.0), -1e-15);
    EXPECT_NEAR(dpo_loss_grad_wrt_margin(-50.0), -1.0, 1e-15);
}

TEST(BatchReport, Definitions) {
    std::vector<DpoExample> zeros(4, ex(0, 0, 0, 0));
    auto r = batch_dpo_report(zeros, {});
    EXPECT_NEAR(r.mean_loss, kLn2, 1e-15);
    EXPECT_EQ(r.implicit_accuracy, 0.0);
    EXPECT_EQ(r.count, 4u);

    std::vector<DpoExample> mixed = {ex(-1, -3, -5, -4), ex(-2, -1, -1, -2), ex(-4, -4, -4, -9)};
    DpoConfig cfg{0.5};
    auto m = batch_dpo_report(mixed, cfg);
    double loss = 0, margin = 0;
    for (const auto& e : mixed) {
        loss += dpo_loss(e, cfg);
        margin += dpo_margin(e, cfg);
    }
    EXPECT_NEAR(m.mean_loss, loss / 3, 1e-15);
    EXPECT_NEAR(m.mean_margin, margin / 3, 1e-15);
    EXPECT_NEAR(m.implicit_accuracy, 1.0 / 3.0, 1e-15);

    std::vector<DpoExample> one = {mixed[0]};
    auto s = batch_dpo_report(one, cfg);
    EXPECT_EQ(s.mean_loss, dpo_loss(mixed[0], cfg));
    EXPECT_EQ(s.mean_margin, dpo_margin(mixed[0], cfg));

    std::vector<DpoExample> none;
    EXPECT_THROW(batch_dpo_report(none, cfg), EmptyBatch);
}

TEST(BatchReport, PairwiseSumAccuracy) {
    std::vector<double> v(1 << 20, 0.1);
    EXPECT_NEAR(pairwise_sum(v), 0.1 * (1 << 20), 1e-9);
    std::vector<double> empty;
    EXPECT_EQ(pairwise_sum(empty), 0.0);
}

TEST(DpoExample, FromJson) {
    auto j = nlohmann::json::parse(
        R"({"query_id": "q1", "policy_logp_w": -1.5, "ref_logp_w": -2, "policy_logp_l": -3, "ref_logp_l": -2.5})");
    auto e = DpoExample::from_json(j);
    EXPECT_EQ(e.query_id, "q1");
    EXPECT_EQ(e.ref_logp_w, -2.0);
    EXPECT_THROW(DpoExample::from_json(nlohmann::json::parse(R"({"query_id": "q"})")), DataError);
}
