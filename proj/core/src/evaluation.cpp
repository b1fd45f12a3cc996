#include "kjm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "kjm/error.hpp"

namespace kjm {

namespace {

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double range_of(std::span<const double> v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
}

std::vector<double> midranks(std::span<const double> a, std::span<const double> b, double& tie_term) {
    const std::size_t n = a.size() + b.size();
    std::vector<std::pair<double, std::size_t>> all;
    all.reserve(n);
    for (std::size_t i = 0; i < a.size(); ++i) all.emplace_back(a[i], i);
    for (std::size_t i = 0; i < b.size(); ++i) all.emplace_back(b[i], a.size() + i);
    std::sort(all.begin(), all.end());
    std::vector<double> ranks(n);
    tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && all[j + 1].first == all[i].first) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t m = i; m <= j; ++m) ranks[all[m].second] = rank;
        const auto t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    return ranks;
}

// Two-sided permutation p over all ways of assigning the pooled ranks to A.
double exact_p(const std::vector<double>& ranks, std::size_t na, double u_obs) {
    const std::size_t n = ranks.size();
    const double mean_u = static_cast<double>(na) * static_cast<double>(n - na) / 2.0;
    const double offset = static_cast<double>(na) * static_cast<double>(na + 1) / 2.0;
    const double observed = std::abs(u_obs - mean_u);
    std::size_t extreme = 0;
    std::size_t total = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != na) continue;
        double rank_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if ((mask >> i) & 1u) rank_sum += ranks[i];
        }
        ++total;
        if (std::abs(rank_sum - offset - mean_u) >= observed - 1e-9) ++extreme;
    }
    return static_cast<double>(extreme) / static_cast<double>(total);
}

std::vector<double> trial_means(const EvaluationReport& r) {
    const std::size_t n = r.waveforms.empty() ? 0 : r.waveforms.front().trial_r.size();
    std::vector<double> out(n, 0.0);
    for (const auto& w : r.waveforms) {
        for (std::size_t t = 0; t < n; ++t) out[t] += w.trial_r[t];
    }
    for (auto& v : out) v /= static_cast<double>(r.waveforms.size());
    return out;
}

WaveformDelta delta(std::string name, double ra, double rb, std::span<const double> ta, std::span<const double> tb) {
    WaveformDelta d;
    d.name = std::move(name);
    d.r_a = ra;
    d.r_b = rb;
    d.improvement = relative_improvement(ra, rb);
    if (!ta.empty() && !tb.empty()) {
        d.p_value = mann_whitney_u(tb, ta).p_two_sided;
    }
    d.significant = d.p_value < kSignificanceLevel;
    return d;
}

std::string cell(double r, double e) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f (%.1f)", r, e);
    return buf;
}

std::string column_label(const std::string& name, std::size_t index, std::size_t count) {
    static const char* const kLabels[] = {"KJM_x Ext/Flex", "KJM_y Add/Abd", "KJM_z Int/Ext"};
    if (count == 3 && name.size() >= 4 && name.find("KJM") != std::string::npos) {
        return kLabels[index];
    }
    return name;
}

}  // namespace

double pearson_r(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        fail(ErrorCode::ShapeMismatch, "pearson_r needs two series of equal length >= 2");
    }
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) {
        fail(ErrorCode::DegenerateSeries, "series has zero variance");
    }
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double rrmse(std::span<const double> truth, std::span<const double> pred) {
    if (truth.size() != pred.size() || truth.empty()) {
        fail(ErrorCode::ShapeMismatch, "rrmse needs two series of equal, non-zero length");
    }
    const double denom = 0.5 * (range_of(truth) + range_of(pred));
    if (denom == 0.0) {
        fail(ErrorCode::DegenerateRange, "both series are constant");
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = truth[i] - pred[i];
        sq += d * d;
    }
    return 100.0 * std::sqrt(sq / static_cast<double>(truth.size())) / denom;
}

std::size_t window_length(double window, std::size_t length) {
    if (!(window > 0.0 && window <= 1.0)) {
        fail(ErrorCode::InvalidArgument, "window must lie in (0, 1]");
    }
    const auto n = static_cast<std::size_t>(std::ceil(window * static_cast<double>(length) - 1e-9));
    return std::clamp<std::size_t>(n, 1, length);
}

EvaluationReport evaluate(std::span<const double> preds, std::span<const double> truths, std::size_t trials,
                          const std::vector<std::string>& waveform_names, std::size_t length, double window) {
    const std::size_t w = waveform_names.size();
    if (preds.size() != truths.size() || preds.size() != trials * w * length || w == 0) {
        fail(ErrorCode::ShapeMismatch, "predictions and truths must both be n x W x L");
    }
    if (trials == 0) {
        fail(ErrorCode::EmptySample, "nothing to evaluate");
    }
    EvaluationReport report;
    report.window = window;
    report.slice_length = window_length(window, length);
    if (report.slice_length < 2) {
        fail(ErrorCode::InvalidArgument, "evaluation slice shorter than two samples");
    }
    std::vector<bool> degenerate(trials, false);
    for (std::size_t k = 0; k < w; ++k) {
        WaveformScore score;
        score.name = waveform_names[k];
        for (std::size_t t = 0; t < trials; ++t) {
            const std::size_t base = (t * w + k) * length;
            const auto p = preds.subspan(base, report.slice_length);
            const auto y = truths.subspan(base, report.slice_length);
            double r = 0.0;
            try {
                r = pearson_r(y, p);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::DegenerateSeries) throw;
                degenerate[t] = true;
            }
            double e = 0.0;
            try {
                e = rrmse(y, p);
            } catch (const Error& err) {
                if (err.code() != ErrorCode::DegenerateRange) throw;
                e = std::equal(y.begin(), y.end(), p.begin()) ? 0.0 : 100.0;
            }
            score.trial_r.push_back(r);
            score.trial_rrmse.push_back(e);
        }
        score.mean_r = mean_of(score.trial_r);
        score.mean_rrmse = mean_of(score.trial_rrmse);
        report.waveforms.push_back(std::move(score));
    }
    double sum_r = 0.0;
    double sum_e = 0.0;
    for (const auto& s : report.waveforms) {
        sum_r += s.mean_r;
        sum_e += s.mean_rrmse;
    }
    report.kjm_mean_r = sum_r / static_cast<double>(w);
    report.kjm_mean_rrmse = sum_e / static_cast<double>(w);
    const auto means = trial_means(report);
    report.best_trial = static_cast<std::size_t>(std::max_element(means.begin(), means.end()) - means.begin());
    report.degenerate_trials = static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), true));
    return report;
}

MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        fail(ErrorCode::EmptySample, "Mann-Whitney needs two non-empty samples");
    }
    double tie_term = 0.0;
    const auto ranks = midranks(a, b, tie_term);
    const auto na = static_cast<double>(a.size());
    const auto nb = static_cast<double>(b.size());
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) rank_sum += ranks[i];
    MannWhitney out;
    out.u = rank_sum - na * (na + 1.0) / 2.0;
    if (a.size() <= 8 && b.size() <= 8) {
        out.exact = true;
        out.p_two_sided = exact_p(ranks, a.size(), out.u);
        return out;
    }
    const double n = na + nb;
    const double mean_u = na * nb / 2.0;
    const double var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0.0) {
        out.p_two_sided = 1.0;
        return out;
    }
    const double z = std::max(0.0, std::abs(out.u - mean_u) - 0.5) / std::sqrt(var);
    out.p_two_sided = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return out;
}

double relative_improvement(double before, double after) {
    if (before == 0.0) {
        fail(ErrorCode::InvalidArgument, "relative improvement from zero is undefined");
    }
    return (after - before) / before * 100.0;
}

Comparison compare_runs(const EvaluationReport& a, const EvaluationReport& b) {
    if (a.fold_signature != b.fold_signature) {
        fail(ErrorCode::FoldMismatch, "reports come from different test folds (" + a.fold_signature + " vs " +
                                          b.fold_signature + ")");
    }
    if (a.waveforms.size() != b.waveforms.size()) {
        fail(ErrorCode::FoldMismatch, "reports cover different waveforms");
    }
    Comparison c;
    for (std::size_t k = 0; k < a.waveforms.size(); ++k) {
        const auto& wa = a.waveforms[k];
        const auto& wb = b.waveforms[k];
        if (wa.name != wb.name || wa.trial_r.size() != wb.trial_r.size()) {
            fail(ErrorCode::FoldMismatch, "waveform " + wa.name + " differs between reports");
        }
        c.waveforms.push_back(delta(wa.name, wa.mean_r, wb.mean_r, wa.trial_r, wb.trial_r));
    }
    const auto ta = trial_means(a);
    const auto tb = trial_means(b);
    c.mean = delta("mean", a.kjm_mean_r, b.kjm_mean_r, ta, tb);
    return c;
}

std::string format_improvement(double percent) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.1f", percent);
    return buf;
}

std::string report_markdown(const std::vector<EvaluationReport>& reports, const Comparison* comparison) {
    if (reports.empty()) return {};
    const auto& first = reports.front();
    std::string out = "| Movement | Limb |";
    std::string rule = "|---|---|";
    for (std::size_t k = 0; k < first.waveforms.size(); ++k) {
        out += " " + column_label(first.waveforms[k].name, k, first.waveforms.size()) + " |";
        rule += "---|";
    }
    out += " Mean |";
    rule += "---|";
    if (comparison != nullptr) {
        out += " Improvement (r %) |";
        rule += "---|";
    }
    out += "\n" + rule + "\n";
    for (const auto& r : reports) {
        out += std::string("| ") + to_string(r.movement) + " | " + to_char(r.stance_limb) + " |";
        for (const auto& w : r.waveforms) out += " " + cell(w.mean_r, w.mean_rrmse) + " |";
        out += " " + cell(r.kjm_mean_r, r.kjm_mean_rrmse) + " |";
        if (comparison != nullptr) {
            out += " " + format_improvement(comparison->mean.improvement) + " |";
        }
        out += "\n";
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "\nWindow: first %zu samples (%.0f %% of stance).\n", first.slice_length,
                  first.window * 100.0);
    out += buf;
    if (comparison != nullptr) {
        std::snprintf(buf, sizeof(buf), "Mann-Whitney p (per-trial mean r): %.4g%s\n", comparison->mean.p_value,
                      comparison->mean.significant ? " (significant at 0.01)" : "");
        out += buf;
    }
    return out;
}

std::string report_json(const EvaluationReport& report) {
    nlohmann::json j;
    j["movement"] = to_string(report.movement);
    j["stance_limb"] = std::string(1, to_char(report.stance_limb));
    j["window"] = report.window;
    j["slice_length"] = report.slice_length;
    j["kjm_mean_r"] = report.kjm_mean_r;
    j["kjm_mean_rrmse"] = report.kjm_mean_rrmse;
    j["best_trial"] = report.best_trial;
    j["degenerate_trials"] = report.degenerate_trials;
    j["fold_signature"] = report.fold_signature;
    auto ws = nlohmann::json::array();
    for (const auto& w : report.waveforms) {
        ws.push_back({{"name", w.name},
                      {"mean_r", w.mean_r},
                      {"mean_rrmse", w.mean_rrmse},
                      {"trial_r", w.trial_r},
                      {"trial_rrmse", w.trial_rrmse}});
    }
    j["waveforms"] = std::move(ws);
    return j.dump(2) + "\n";
}

EvaluationReport report_from_json(const std::string& text) {
    EvaluationReport r;
    try {
        const auto j = nlohmann::json::parse(text);
        r.movement = movement_from_string(j.at("movement").get<std::string>());
        r.stance_limb = limb_from_char(j.at("stance_limb").get<std::string>().at(0));
        r.window = j.at("window").get<double>();
        r.slice_length = j.at("slice_length").get<std::size_t>();
        r.kjm_mean_r = j.at("kjm_mean_r").get<double>();
        r.kjm_mean_rrmse = j.at("kjm_mean_rrmse").get<double>();
        r.best_trial = j.at("best_trial").get<std::size_t>();
        r.degenerate_trials = j.at("degenerate_trials").get<std::size_t>();
        r.fold_signature = j.at("fold_signature").get<std::string>();
        for (const auto& w : j.at("waveforms")) {
            WaveformScore s;
            s.name = w.at("name").get<std::string>();
            s.mean_r = w.at("mean_r").get<double>();
            s.mean_rrmse = w.at("mean_rrmse").get<double>();
            s.trial_r = w.at("trial_r").get<std::vector<double>>();
            s.trial_rrmse = w.at("trial_rrmse").get<std::vector<double>>();
            r.waveforms.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptFile, std::string("report: ") + e.what());
    }
    return r;
}

std::string comparison_json(const Comparison& comparison) {
    auto row = [](const WaveformDelta& d) {
        return nlohmann::json{{"name", d.name},
                              {"r_a", d.r_a},
                              {"r_b", d.r_b},
                              {"improvement", d.improvement},
                              {"improvement_text", format_improvement(d.improvement)},
                              {"p_value", d.p_value},
                              {"significant", d.significant}};
    };
    nlohmann::json j;
    auto ws = nlohmann::json::array();
    for (const auto& d : comparison.waveforms) ws.push_back(row(d));
    j["waveforms"] = std::move(ws);
    j["mean"] = row(comparison.mean);
    return j.dump(2) + "\n";
}

}  // namespace kjm
