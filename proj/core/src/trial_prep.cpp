#include "kjm/trial_prep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <unordered_set>

#include "kjm/error.hpp"
#include "kjm/rng.hpp"
#include "kjm/spline.hpp"

namespace kjm {

const char* to_string(Movement m) {
    switch (m) {
        case Movement::Walk: return "Walk";
        case Movement::Run: return "Run";
        case Movement::SidestepL: return "SidestepL";
        case Movement::SidestepR: return "SidestepR";
        case Movement::Crossover: return "Crossover";
    }
    return "?";
}

Movement movement_from_string(std::string_view s) {
    for (auto m : {Movement::Walk, Movement::Run, Movement::SidestepL, Movement::SidestepR, Movement::Crossover}) {
        if (s == to_string(m)) {
            return m;
        }
    }
    fail(ErrorCode::InvalidArgument, "unknown movement '" + std::string(s) + "'");
}

const char* to_string(ResponseKind k) { return k == ResponseKind::KJM ? "KJM" : "GRFM"; }

ResponseKind response_kind_from_string(std::string_view s) {
    if (s == "KJM") {
        return ResponseKind::KJM;
    }
    if (s == "GRFM") {
        return ResponseKind::GRFM;
    }
    fail(ErrorCode::InvalidArgument, "unknown response kind '" + std::string(s) + "'");
}

void MovementRule::validate() const {
    if (!(walk_run_speed > 0.0)) {
        fail(ErrorCode::InvalidArgument, "walk/run speed must be positive");
    }
    if (!(sidestep_angle > 0.0 && sidestep_angle < 90.0)) {
        fail(ErrorCode::InvalidArgument, "sidestep angle must lie in (0, 90)");
    }
    if (!(approach_window > 0.0) || !(departure_window > 0.0)) {
        fail(ErrorCode::InvalidArgument, "approach/departure windows must be positive");
    }
}

MotionEstimate estimate_motion(const MarkerTrajectorySet& markers, std::size_t fs, std::size_t to,
                               const MovementRule& rule) {
    rule.validate();
    if (to <= fs) {
        fail(ErrorCode::DegenerateStance, "toe off must follow foot strike");
    }
    const double stance = static_cast<double>(to - fs);
    const auto approach = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(rule.approach_window * stance)));
    const auto departure =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(rule.departure_window * stance)));
    if (fs < approach) {
        fail(ErrorCode::InsufficientLeadIn, "no approach window before foot strike");
    }
    if (to + departure >= markers.frame_count()) {
        fail(ErrorCode::InsufficientFollowThrough, "no departure window after toe off");
    }
    auto sacr = [&](std::size_t f) { return markers.at(f, kSACR); };

    MotionEstimate est;
    double speed = 0.0;
    for (std::size_t f = fs - approach; f < fs; ++f) {
        speed += std::hypot(sacr(f + 1).x - sacr(f).x, sacr(f + 1).y - sacr(f).y);
    }
    est.approach_speed = speed / static_cast<double>(approach) * markers.rate / 1000.0;

    const double ax = sacr(fs).x - sacr(fs - approach).x;
    const double ay = sacr(fs).y - sacr(fs - approach).y;
    const double dx = sacr(to + departure).x - sacr(to).x;
    const double dy = sacr(to + departure).y - sacr(to).y;
    est.turn_angle = std::atan2(ax * dy - ay * dx, ax * dx + ay * dy) * 180.0 / std::numbers::pi;
    return est;
}

Movement classify_movement(const MarkerTrajectorySet& markers, std::size_t fs, std::size_t to, Limb stance_limb,
                           const MovementRule& rule) {
    const auto est = estimate_motion(markers, fs, to, rule);
    if (std::fabs(est.turn_angle) < rule.sidestep_angle) {
        return est.approach_speed < rule.walk_run_speed ? Movement::Walk : Movement::Run;
    }
    const bool turns_left = est.turn_angle > 0.0;
    if (stance_limb == Limb::Right) {
        return turns_left ? Movement::SidestepL : Movement::Crossover;
    }
    return turns_left ? Movement::Crossover : Movement::SidestepR;
}

std::vector<double> normalize_markers(const MarkerTrajectorySet& markers, std::size_t fs, std::size_t to) {
    if (to <= fs) {
        fail(ErrorCode::DegenerateStance, "toe off must follow foot strike");
    }
    const double start = static_cast<double>(fs) - kMarkerLeadFraction * static_cast<double>(to - fs);
    if (start < 0.0) {
        fail(ErrorCode::InsufficientLeadIn, "marker window starts before the record");
    }
    if (to >= markers.frame_count()) {
        fail(ErrorCode::WindowOutOfRange, "toe off beyond marker record");
    }
    const auto first = static_cast<std::size_t>(std::floor(start));
    const std::size_t span = to - first + 1;
    std::vector<double> out(kPredictorFeatures);
    std::vector<double> series(span);
    for (std::size_t m = 0; m < kMarkerCount; ++m) {
        for (std::size_t axis = 0; axis < 3; ++axis) {
            for (std::size_t f = 0; f < span; ++f) {
                const auto& p = markers.at(first + f, m);
                const double v = axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
                if (!std::isfinite(v)) {
                    fail(ErrorCode::GappedTrajectory, "non-finite marker sample inside the window");
                }
                series[f] = v;
            }
            const auto resampled =
                resample(series, start - static_cast<double>(first), static_cast<double>(to - first), kPredictorSamples);
            for (std::size_t s = 0; s < kPredictorSamples; ++s) {
                out[(m * kPredictorSamples + s) * 3 + axis] = resampled[s];
            }
        }
    }
    return out;
}

std::vector<double> normalize_response(std::span<const double> series, std::size_t waveforms, double fs, double to,
                                       ResponseKind kind) {
    if (waveforms == 0 || series.size() % waveforms != 0) {
        fail(ErrorCode::ShapeMismatch, "series is not samples x waveforms");
    }
    if (!(to > fs)) {
        fail(ErrorCode::DegenerateStance, "toe off must follow foot strike");
    }
    const std::size_t samples = series.size() / waveforms;
    const double start = kind == ResponseKind::KJM ? fs : fs - kForceLeadFraction * (to - fs);
    const std::size_t length = kind == ResponseKind::KJM ? kKjmLength : kGrfmLength;
    if (start < 0.0 || to > static_cast<double>(samples) - 1.0) {
        fail(ErrorCode::WindowOutOfRange, "response window outside the record");
    }
    const auto first = static_cast<std::size_t>(std::floor(start));
    const auto last = static_cast<std::size_t>(std::ceil(to));
    const std::size_t span = last - first + 1;
    std::vector<double> out(waveforms * length);
    std::vector<double> column(span);
    for (std::size_t w = 0; w < waveforms; ++w) {
        for (std::size_t i = 0; i < span; ++i) {
            column[i] = series[(first + i) * waveforms + w];
        }
        const auto r = resample(column, start - static_cast<double>(first), to - static_cast<double>(first), length);
        std::copy(r.begin(), r.end(), out.begin() + static_cast<std::ptrdiff_t>(w * length));
    }
    return out;
}

std::vector<std::string> kjm_waveform_names(Limb limb) {
    const std::string p(1, to_char(limb));
    return {p + "KJMx", p + "KJMy", p + "KJMz"};
}

std::vector<std::string> grfm_waveform_names() {
    return {kPlateChannelNames.begin(), kPlateChannelNames.end()};
}

const ResponseBlock* TrialSample::response(ResponseKind kind) const {
    for (const auto& r : responses) {
        if (r.kind == kind) {
            return &r;
        }
    }
    return nullptr;
}

TrialSample prepare_trial(const TrialInput& input, const PrepOptions& options) {
    const auto events = detect_events(input.plate, input.markers, options.thresholds);
    TrialSample sample;
    sample.source_id = input.source_id;
    sample.stance_limb = events.stance_limb;
    sample.orientation = events.orientation;
    sample.movement =
        classify_movement(input.markers, events.fs_frame, events.to_frame, events.stance_limb, options.rule);
    sample.predictor = normalize_markers(input.markers, events.fs_frame, events.to_frame);

    const auto& kjm = input.knee_moments[static_cast<std::size_t>(events.stance_limb)];
    if (!kjm.empty()) {
        std::vector<double> series(kjm.size() * 3);
        for (std::size_t f = 0; f < kjm.size(); ++f) {
            series[f * 3] = kjm[f].x;
            series[f * 3 + 1] = kjm[f].y;
            series[f * 3 + 2] = kjm[f].z;
        }
        ResponseBlock block;
        block.kind = ResponseKind::KJM;
        block.names = kjm_waveform_names(events.stance_limb);
        block.length = kKjmLength;
        block.values = normalize_response(series, 3, static_cast<double>(events.fs_frame),
                                          static_cast<double>(events.to_frame), ResponseKind::KJM);
        sample.responses.push_back(std::move(block));
    }
    ResponseBlock grfm;
    grfm.kind = ResponseKind::GRFM;
    grfm.names = grfm_waveform_names();
    grfm.length = kGrfmLength;
    grfm.values = normalize_response(input.plate.channels, 6, static_cast<double>(events.foot_strike),
                                     static_cast<double>(events.toe_off), ResponseKind::GRFM);
    sample.responses.push_back(std::move(grfm));
    return sample;
}

std::span<const float> Dataset::x_row(std::size_t i) const {
    return std::span<const float>(X).subspan(i * kPredictorFeatures, kPredictorFeatures);
}

std::span<const float> Dataset::y_row(std::size_t i) const {
    const std::size_t width = response_width();
    return std::span<const float>(Y).subspan(i * width, width);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.kind = kind;
    out.waveform_length = waveform_length;
    out.waveform_names = waveform_names;
    const std::size_t width = response_width();
    out.X.reserve(rows.size() * kPredictorFeatures);
    out.Y.reserve(rows.size() * width);
    for (std::size_t r : rows) {
        if (r >= this->rows()) {
            fail(ErrorCode::InvalidArgument, "row index out of range");
        }
        const auto x = x_row(r);
        const auto y = y_row(r);
        out.X.insert(out.X.end(), x.begin(), x.end());
        out.Y.insert(out.Y.end(), y.begin(), y.end());
        out.meta.push_back(meta[r]);
    }
    return out;
}

std::optional<std::size_t> Dataset::waveform_index(std::string_view name) const {
    for (std::size_t i = 0; i < waveform_names.size(); ++i) {
        if (waveform_names[i] == name) {
            return i;
        }
    }
    return std::nullopt;
}

Dataset assemble_dataset(std::span<const TrialSample> trials, Movement movement, Limb stance_limb, ResponseKind kind,
                         HygieneLog* log) {
    auto reject = [&](const TrialSample& t, std::string reason) {
        if (log != nullptr) {
            log->push_back({t.source_id, std::move(reason)});
        }
    };
    Dataset ds;
    ds.kind = kind;
    ds.waveform_length = kind == ResponseKind::KJM ? kKjmLength : kGrfmLength;
    bool names_set = false;
    std::unordered_set<std::string> seen;
    std::vector<float> xrow(kPredictorFeatures);
    for (const auto& t : trials) {
        if (t.movement == Movement::Crossover) {
            reject(t, "Crossover");
            continue;
        }
        if (t.movement != movement || t.stance_limb != stance_limb) {
            fail(ErrorCode::InvalidArgument, "trial " + t.source_id + " is " + to_string(t.movement) + "/" +
                                                 to_char(t.stance_limb) + ", dataset is " + to_string(movement) +
                                                 "/" + to_char(stance_limb));
        }
        const auto* block = t.response(kind);
        if (block == nullptr) {
            reject(t, "MissingResponse");
            continue;
        }
        if (!names_set) {
            ds.waveform_names = block->names;
            names_set = true;
        } else if (block->names != ds.waveform_names) {
            fail(ErrorCode::ShapeMismatch, "trial " + t.source_id + " has a different waveform set");
        }
        if (t.predictor.size() != kPredictorFeatures || block->length != ds.waveform_length ||
            block->values.size() != block->names.size() * block->length) {
            fail(ErrorCode::ShapeMismatch, "trial " + t.source_id + " has malformed arrays");
        }
        const bool finite =
            std::all_of(t.predictor.begin(), t.predictor.end(), [](double v) { return std::isfinite(v); }) &&
            std::all_of(block->values.begin(), block->values.end(), [](double v) { return std::isfinite(v); });
        if (!finite) {
            reject(t, "NonFinite");
            continue;
        }
        for (std::size_t i = 0; i < kPredictorFeatures; ++i) {
            xrow[i] = static_cast<float>(t.predictor[i]);
        }
        std::string key(reinterpret_cast<const char*>(xrow.data()), xrow.size() * sizeof(float));
        if (!seen.insert(std::move(key)).second) {
            reject(t, "Duplicate");
            continue;
        }
        ds.X.insert(ds.X.end(), xrow.begin(), xrow.end());
        for (double v : block->values) {
            ds.Y.push_back(static_cast<float>(v));
        }
        ds.meta.push_back({t.movement, t.stance_limb, t.orientation, t.source_id});
    }
    if (ds.rows() == 0) {
        fail(ErrorCode::EmptyDataset, "no trials survived hygiene");
    }
    return ds;
}

Partition split_indices(std::size_t n, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        fail(ErrorCode::InvalidArgument, "split ratio must lie in (0, 1)");
    }
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    if (n == 0 || n_train == 0 || n_train == n) {
        fail(ErrorCode::EmptyDataset, "split leaves an empty partition");
    }
    const auto perm = shuffled_indices(n, seed);
    Partition p;
    p.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    p.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(p.train.begin(), p.train.end());
    std::sort(p.test.begin(), p.test.end());
    return p;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double ratio, std::uint64_t seed) {
    const auto p = split_indices(dataset.rows(), ratio, seed);
    return {dataset.subset(p.train), dataset.subset(p.test)};
}

std::vector<Partition> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2 || n < k) {
        fail(ErrorCode::TooFewSamples, "k-fold needs k >= 2 and at least k rows");
    }
    const auto perm = shuffled_indices(n, seed);
    std::vector<Partition> folds(k);
    std::size_t offset = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        auto& part = folds[f];
        for (std::size_t i = 0; i < n; ++i) {
            if (i >= offset && i < offset + size) {
                part.test.push_back(perm[i]);
            } else {
                part.train.push_back(perm[i]);
            }
        }
        std::sort(part.train.begin(), part.train.end());
        std::sort(part.test.begin(), part.test.end());
        offset += size;
    }
    return folds;
}

std::vector<std::pair<Dataset, Dataset>> kfold(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
    std::vector<std::pair<Dataset, Dataset>> out;
    for (const auto& p : kfold_indices(dataset.rows(), k, seed)) {
        out.emplace_back(dataset.subset(p.train), dataset.subset(p.test));
    }
    return out;
}

std::string fold_signature(const Dataset& dataset, const Partition& partition) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto* part : {&partition.train, &partition.test}) {
        std::vector<std::string> ids;
        ids.reserve(part->size());
        for (std::size_t r : *part) {
            ids.push_back(dataset.meta.at(r).source_id);
        }
        std::sort(ids.begin(), ids.end());
        for (const auto& id : ids) {
            mix(id);
            mix("\n");
        }
        mix("|");
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace kjm
