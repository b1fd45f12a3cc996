#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kjm/error.hpp"
#include "kjm/evaluation.hpp"

using namespace kjm;

namespace {

template <class Fn>
ErrorCode code_of(Fn fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::IoError;
}

/// Exact two-sided p by enumerating every assignment of ranks 1..n to sample A (no ties).
double brute_force_p(std::size_t na, std::size_t nb, double u_obs) {
    const std::size_t n = na + nb;
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(na), true);
    const double centre = static_cast<double>(na * nb) / 2.0;
    std::size_t extreme = 0;
    std::size_t total = 0;
    do {
        double rank_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (pick[i]) rank_sum += static_cast<double>(i + 1);
        }
        const double u = rank_sum - static_cast<double>(na * (na + 1)) / 2.0;
        if (std::abs(u - centre) >= std::abs(u_obs - centre) - 1e-12) ++extreme;
        ++total;
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return static_cast<double>(extreme) / static_cast<double>(total);
}

EvaluationReport scored(const std::vector<double>& trial_r) {
    EvaluationReport r;
    WaveformScore w;
    w.name = "KJMx";
    w.trial_r = trial_r;
    w.mean_r = std::accumulate(trial_r.begin(), trial_r.end(), 0.0) / static_cast<double>(trial_r.size());
    r.waveforms = {w};
    r.kjm_mean_r = w.mean_r;
    r.fold_signature = "abc";
    return r;
}

}  // namespace

TEST(Metrics, PearsonHandCase) {
    const std::vector<double> a = {1, 2, 3, 4};
    const std::vector<double> b = {1, 3, 2, 4};
    EXPECT_NEAR(pearson_r(a, b), 0.8, 1e-12);
    EXPECT_NEAR(pearson_r(a, a), 1.0, 1e-12);
    const std::vector<double> flipped = {4, 3, 2, 1};
    EXPECT_NEAR(pearson_r(a, flipped), -1.0, 1e-12);
    EXPECT_EQ(code_of([&] { pearson_r(a, std::vector<double>(4, 2.0)); }), ErrorCode::DegenerateSeries);
}

TEST(Metrics, RrmseHandCase) {
    const std::vector<double> truth = {0, 1};
    const std::vector<double> pred = {1, 2};
    EXPECT_NEAR(rrmse(truth, pred), 100.0, 1e-12);
    EXPECT_NEAR(rrmse(truth, truth), 0.0, 1e-12);
    const std::vector<double> flat = {3, 3};
    EXPECT_EQ(code_of([&] { rrmse(flat, flat); }), ErrorCode::DegenerateRange);
}

TEST(Metrics, WindowLength) {
    EXPECT_EQ(window_length(0.33, 90), 30u);
    EXPECT_EQ(window_length(1.0, 90), 90u);
    EXPECT_EQ(window_length(0.5, 90), 45u);
    EXPECT_EQ(code_of([] { window_length(0.0, 90); }), ErrorCode::InvalidArgument);
}

TEST(Evaluate, SlicesAndDegenerateTrials) {
    // two trials, one waveform of length 6; window 0.5 keeps samples 0..2
    const std::vector<std::string> names = {"KJMx"};
    std::vector<double> truth = {1, 2, 3, 100, -100, 0, 5, 5, 5, 0, 0, 0};
    std::vector<double> pred = {1, 3, 2, 0, 0, 0, 1, 2, 3, 9, 9, 9};
    const auto r = evaluate(pred, truth, 2, names, 6, 0.5);
    EXPECT_EQ(r.slice_length, 3u);
    ASSERT_EQ(r.waveforms.size(), 1u);
    EXPECT_NEAR(r.waveforms[0].trial_r[0], 0.5, 1e-12);
    EXPECT_EQ(r.waveforms[0].trial_r[1], 0.0);
    EXPECT_EQ(r.degenerate_trials, 1u);
    EXPECT_NEAR(r.waveforms[0].mean_r, 0.25, 1e-12);
    EXPECT_EQ(r.best_trial, 0u);
    // rmse sqrt(2/3) over ranges 2 and 2
    EXPECT_NEAR(r.waveforms[0].trial_rrmse[0], 100.0 * std::sqrt(2.0 / 3.0) / 2.0, 1e-9);
}

TEST(MannWhitney, SmallExactCases) {
    const std::vector<double> a = {1, 2};
    const std::vector<double> b = {3, 4};
    const auto r = mann_whitney_u(a, b);
    EXPECT_EQ(r.u, 0.0);
    EXPECT_TRUE(r.exact);
    EXPECT_NEAR(r.p_two_sided, 1.0 / 3.0, 1e-12);
    EXPECT_EQ(mann_whitney_u(b, a).u, 4.0);
    EXPECT_EQ(mann_whitney_u(a, a).u, 2.0);
}

TEST(MannWhitney, ExactPMatchesEnumeration) {
    const std::vector<std::vector<double>> as = {{0.1, 0.9, 0.4}, {5, 1, 7, 3}, {2.5, 8.5, 1.5, 6.5, 0.5}};
    const std::vector<std::vector<double>> bs = {{0.2, 0.3, 0.8, 0.7}, {2, 4, 6}, {3, 4, 5, 7, 8, 9}};
    for (std::size_t i = 0; i < as.size(); ++i) {
        const auto r = mann_whitney_u(as[i], bs[i]);
        double brute_u = 0.0;
        for (double x : as[i]) {
            for (double y : bs[i]) brute_u += x > y ? 1.0 : 0.0;
        }
        EXPECT_EQ(r.u, brute_u);
        EXPECT_NEAR(r.p_two_sided, brute_force_p(as[i].size(), bs[i].size(), r.u), 1e-12) << "case " << i;
    }
}

TEST(MannWhitney, LargeSamplesUseNormalApproximation) {
    std::vector<double> a(20), b(20);
    for (std::size_t i = 0; i < 20; ++i) {
        a[i] = static_cast<double>(i);
        b[i] = 100.0 + static_cast<double>(i);
    }
    const auto r = mann_whitney_u(a, b);
    EXPECT_FALSE(r.exact);
    EXPECT_EQ(r.u, 0.0);
    // z = (200 - 0.5) / sqrt(400 * 41 / 12)
    const double z = 199.5 / std::sqrt(400.0 * 41.0 / 12.0);
    EXPECT_NEAR(r.p_two_sided, std::erfc(z / std::sqrt(2.0)), 1e-15);
    EXPECT_EQ(code_of([&] { mann_whitney_u(a, std::vector<double>{}); }), ErrorCode::EmptySample);
}

TEST(Compare, IdenticalAndShiftedRuns) {
    std::vector<double> base(20);
    for (std::size_t i = 0; i < base.size(); ++i) base[i] = 0.5 + 0.001 * static_cast<double>(i);
    const auto a = scored(base);
    const auto same = compare_runs(a, a);
    EXPECT_EQ(same.mean.improvement, 0.0);
    EXPECT_FALSE(same.mean.significant);

    auto shifted = base;
    for (auto& v : shifted) v += 0.1;
    const auto c = compare_runs(a, scored(shifted));
    EXPECT_LT(c.mean.p_value, 0.01);
    EXPECT_TRUE(c.mean.significant);
    EXPECT_NEAR(c.mean.improvement, relative_improvement(a.kjm_mean_r, a.kjm_mean_r + 0.1), 1e-9);

    auto other = scored(base);
    other.fold_signature = "xyz";
    EXPECT_EQ(code_of([&] { compare_runs(a, other); }), ErrorCode::FoldMismatch);
}

TEST(Compare, ImprovementFormatting) {
    EXPECT_EQ(format_improvement(4.2), "+4.2");
    EXPECT_EQ(format_improvement(-0.04), "-0.0");
    EXPECT_NEAR(relative_improvement(0.8, 0.84), 5.0, 1e-9);
    EXPECT_EQ(code_of([] { relative_improvement(0.0, 1.0); }), ErrorCode::InvalidArgument);
}

TEST(Report, MarkdownAndJson) {
    const std::vector<std::string> names = {"RKJMx", "RKJMy", "RKJMz"};
    std::vector<double> truth(2 * 3 * 90), pred(2 * 3 * 90);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        truth[i] = std::sin(0.1 * static_cast<double>(i));
        pred[i] = truth[i] + 0.05 * std::cos(0.7 * static_cast<double>(i));
    }
    auto r = evaluate(pred, truth, 2, names, 90);
    r.fold_signature = "sig";
    const auto md = report_markdown({r});
    EXPECT_EQ(md.rfind("| Movement | Limb |", 0), 0u);
    EXPECT_NE(md.find("Mean |"), std::string::npos);
    EXPECT_NE(md.find("first 30 samples"), std::string::npos);
    EXPECT_EQ(md.find("Improvement"), std::string::npos);
    const auto cmp = compare_runs(r, r);
    EXPECT_NE(report_markdown({r}, &cmp).find("Improvement (r %)"), std::string::npos);
    EXPECT_EQ(report_from_json(report_json(r)), r);
}
