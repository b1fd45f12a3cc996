#include "kjm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "kjm/error.hpp"
#include "kjm/rng.hpp"

namespace kjm::synth {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kLatents = kShapeCount + 2;
constexpr std::size_t kKjmTerms = 4;
constexpr std::size_t kGrfmTerms = 3;
constexpr std::uint64_t kLinkSeed = 0x4b4a4d2d6c696e6bULL;

constexpr double kFootLength = 200.0;
constexpr double kPlateHalfX = 200.0;
constexpr double kPlateHalfY = 150.0;
constexpr double kPelvisHeight = 950.0;
constexpr double kTrunkHeight = 500.0;

double smoothstep(double t) {
    const double c = std::clamp(t, 0.0, 1.0);
    return c * c * (3.0 - 2.0 * c);
}

Vec2 direction(double radians) { return {std::cos(radians), std::sin(radians)}; }

// One coefficient of the link: a + b.q + sum_{i<=k} Q_ik q_i q_k
struct QuadraticForm {
    double a = 0.0;
    std::array<double, kLatents> b{};
    std::array<double, kLatents * kLatents> q{};

    [[nodiscard]] double operator()(const std::array<double, kLatents>& z) const {
        double v = a;
        for (std::size_t i = 0; i < kLatents; ++i) {
            v += b[i] * z[i];
            for (std::size_t k = i; k < kLatents; ++k) v += q[i * kLatents + k] * z[i] * z[k];
        }
        return v;
    }
};

QuadraticForm make_form(Rng& rng, double a, double linear_sd, double quad_sd) {
    QuadraticForm f;
    f.a = a;
    for (auto& v : f.b) v = rng.normal(0.0, linear_sd);
    for (std::size_t i = 0; i < kLatents; ++i) {
        for (std::size_t k = i; k < kLatents; ++k) f.q[i * kLatents + k] = rng.normal(0.0, quad_sd);
    }
    return f;
}

struct Link {
    std::array<double, 3> kjm_amplitude{60000.0, 25000.0, 8000.0};
    std::array<std::array<QuadraticForm, kKjmTerms>, 3> kjm;
    std::array<double, 6> grfm_amplitude{0.18, 0.10, 1.0, 40000.0, 60000.0, 15000.0};
    std::array<std::array<QuadraticForm, kGrfmTerms>, 6> grfm;
};

const Link& link() {
    static const Link l = [] {
        Link out;
        Rng rng(kLinkSeed);
        const double base[3][kKjmTerms] = {{1.0, 0.30, -0.20, 0.10}, {0.6, -0.40, 0.25, 0.0}, {0.5, 0.35, 0.20, -0.15}};
        for (std::size_t w = 0; w < 3; ++w) {
            for (std::size_t j = 0; j < kKjmTerms; ++j) out.kjm[w][j] = make_form(rng, base[w][j], 0.22, 0.10);
        }
        const double gbase[6][kGrfmTerms] = {{0.2, -1.0, 0.1},  {0.6, 0.2, -0.1}, {1.0, 0.0, 0.15},
                                             {0.5, 0.4, -0.2},  {0.2, 0.9, 0.1},  {0.4, -0.5, 0.3}};
        for (std::size_t c = 0; c < 6; ++c) {
            for (std::size_t j = 0; j < kGrfmTerms; ++j) out.grfm[c][j] = make_form(rng, gbase[c][j], 0.15, 0.07);
        }
        return out;
    }();
    return l;
}

struct SpeedBand {
    double lo;
    double hi;
};

SpeedBand speed_band(TrialKind kind) {
    switch (kind) {
        case TrialKind::Walk: return {1.0, 2.0};
        case TrialKind::Run: return {2.5, 4.5};
        case TrialKind::Sidestep: return {2.5, 4.0};
    }
    return {1.0, 2.0};
}

double body_scale(TrialKind kind) {
    switch (kind) {
        case TrialKind::Walk: return 750.0;
        case TrialKind::Run: return 1800.0;
        case TrialKind::Sidestep: return 1600.0;
    }
    return 750.0;
}

double side(Limb limb) { return limb == Limb::Right ? 1.0 : -1.0; }

/// Latents in the right-stance frame so that mirrored recipes share them.
std::array<double, kLatents> latents(const TrialRecipe& r) {
    std::array<double, kLatents> z{};
    std::copy(r.shape.begin(), r.shape.end(), z.begin());
    const auto band = speed_band(r.kind);
    z[kShapeCount] = (r.approach_speed - 0.5 * (band.lo + band.hi)) / (0.5 * (band.hi - band.lo));
    z[kShapeCount + 1] = side(r.stance_limb) * r.turn_angle / 45.0;
    return z;
}

std::size_t stance_frames_for(TrialKind kind, double speed) {
    const auto band = speed_band(kind);
    const double sv = (speed - 0.5 * (band.lo + band.hi)) / (0.5 * (band.hi - band.lo));
    double seconds = 0.0;
    switch (kind) {
        case TrialKind::Walk: seconds = 0.60 - 0.08 * sv; break;
        case TrialKind::Run: seconds = 0.24 - 0.05 * sv; break;
        case TrialKind::Sidestep: seconds = 0.30 - 0.04 * sv; break;
    }
    return static_cast<std::size_t>(std::llround(seconds * kMarkerRate));
}

Movement expected_movement(const TrialRecipe& r) {
    if (std::fabs(r.turn_angle) < 20.0) {
        return r.approach_speed < 2.16 ? Movement::Walk : Movement::Run;
    }
    const bool left_turn = r.turn_angle > 0.0;
    if (r.stance_limb == Limb::Right) return left_turn ? Movement::SidestepL : Movement::Crossover;
    return left_turn ? Movement::Crossover : Movement::SidestepR;
}

Vec3 reflect(const Vec3& v) { return {v.x, -v.y, v.z}; }

}  // namespace

const char* to_string(TrialKind k) {
    switch (k) {
        case TrialKind::Walk: return "walk";
        case TrialKind::Run: return "run";
        case TrialKind::Sidestep: return "sidestep";
    }
    return "?";
}

TrialKind trial_kind_from_string(std::string_view s) {
    for (auto k : {TrialKind::Walk, TrialKind::Run, TrialKind::Sidestep}) {
        if (s == to_string(k)) return k;
    }
    fail(ErrorCode::InvalidArgument, "unknown trial kind '" + std::string(s) + "'");
}

void TrialRecipe::validate() const {
    if (stance_frames < 8) fail(ErrorCode::InvalidArgument, "stance must span at least 8 frames");
    if (!(noise_sd >= 0.0) || !(force_noise_sd >= 0.0)) {
        fail(ErrorCode::InvalidArgument, "noise must be non-negative");
    }
    if (!(approach_speed > 0.0)) fail(ErrorCode::InvalidArgument, "approach speed must be positive");
    if (kind == TrialKind::Walk && approach_speed >= 2.16) {
        fail(ErrorCode::InvalidArgument, "walk recipes must stay below 2.16 m/s");
    }
    if (kind != TrialKind::Walk && approach_speed < 2.16) {
        fail(ErrorCode::InvalidArgument, "run and sidestep recipes must reach 2.16 m/s");
    }
    for (double v : shape) {
        if (!(v >= -1.0 && v <= 1.0)) fail(ErrorCode::InvalidArgument, "shape parameters lie in [-1, 1]");
    }
}

TrialRecipe draw_recipe(TrialKind kind, std::uint64_t seed, const DrawOptions& options) {
    Rng rng(derive_seed(seed, 7));
    TrialRecipe r;
    r.kind = kind;
    r.seed = seed;
    r.stance_limb = options.stance_limb;
    r.noise_sd = options.noise_sd;
    r.force_noise_sd = options.force_noise_sd;
    for (auto& v : r.shape) v = rng.uniform(-1.0, 1.0);
    const auto band = speed_band(kind);
    r.approach_speed = rng.uniform(band.lo, band.hi);
    r.stance_frames = stance_frames_for(kind, r.approach_speed);
    const double s = side(options.stance_limb);
    switch (kind) {
        case TrialKind::Walk:
            r.turn_angle = rng.uniform(-8.0, 8.0);
            r.contact = FootOrientation::HeelDown;
            break;
        case TrialKind::Run:
            r.turn_angle = rng.uniform(-8.0, 8.0);
            r.contact = FootOrientation::Flat;
            break;
        case TrialKind::Sidestep: {
            const double magnitude = rng.uniform(25.0, 55.0);
            const bool crossover = rng.uniform() < options.crossover_rate;
            r.turn_angle = s * (crossover ? -magnitude : magnitude);
            const double pick = rng.uniform();
            r.contact = pick < 0.3 ? FootOrientation::HeelDown
                                   : (pick < 0.7 ? FootOrientation::Flat : FootOrientation::ToeDown);
            break;
        }
    }
    return r;
}

TrialRecipe mirror(const TrialRecipe& recipe) {
    TrialRecipe m = recipe;
    m.stance_limb = opposite(recipe.stance_limb);
    m.turn_angle = -recipe.turn_angle;
    return m;
}

std::array<double, 3> kjm_at(const TrialRecipe& recipe, double s) {
    const auto& l = link();
    const auto z = latents(recipe);
    std::array<double, 3> out{};
    for (std::size_t w = 0; w < 3; ++w) {
        double v = 0.0;
        for (std::size_t j = 0; j < kKjmTerms; ++j) {
            v += l.kjm[w][j](z) * std::sin(static_cast<double>(j + 1) * kPi * s);
        }
        out[w] = l.kjm_amplitude[w] * v;
    }
    return out;
}

std::vector<double> kjm_waveforms(const TrialRecipe& recipe, std::size_t length) {
    std::vector<double> out(3 * length);
    for (std::size_t i = 0; i < length; ++i) {
        const double s = length == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(length - 1);
        const auto v = kjm_at(recipe, s);
        for (std::size_t w = 0; w < 3; ++w) out[w * length + i] = v[w];
    }
    return out;
}

std::array<double, 6> grfm_at(const TrialRecipe& recipe, double s) {
    std::array<double, 6> out{};
    if (!(s >= 0.0 && s < 1.0)) return out;
    const auto& l = link();
    const auto z = latents(recipe);
    const double bw = body_scale(recipe.kind);
    std::array<double, 6> canonical{};
    for (std::size_t c = 0; c < 6; ++c) {
        if (c == kFz) {
            // sin(x) + a sin(3x) stays non-negative on [0, pi] for |a| <= 1/3
            const double gain = std::max(0.5, l.grfm[c][0](z));
            double a3 = l.grfm[c][2](z);
            if (recipe.kind == TrialKind::Walk) a3 += 0.2;
            a3 = std::clamp(a3, -1.0 / 3.0, 1.0 / 3.0);
            canonical[c] = kContactForce + bw * gain * (std::sin(kPi * s) + a3 * std::sin(3.0 * kPi * s));
            continue;
        }
        double v = 0.0;
        for (std::size_t j = 0; j < kGrfmTerms; ++j) {
            v += l.grfm[c][j](z) * std::sin(static_cast<double>(j + 1) * kPi * s);
        }
        const double scale = c < kFz ? bw : bw / 1000.0;
        canonical[c] = l.grfm_amplitude[c] * scale * v;
    }
    out = canonical;
    if (recipe.stance_limb == Limb::Left) {
        out[kFy] = -canonical[kFy];
        out[kMx] = -canonical[kMx];
        out[kMz] = -canonical[kMz];
    }
    return out;
}

SyntheticTrial generate_trial(const TrialRecipe& recipe, std::string source) {
    recipe.validate();
    SyntheticTrial trial;
    trial.recipe = recipe;
    trial.expected_movement = expected_movement(recipe);
    trial.input.source_id = std::move(source);

    const std::size_t stance = recipe.stance_frames;
    const auto sd = static_cast<double>(stance);
    const std::size_t fs = static_cast<std::size_t>(std::ceil(0.9 * sd)) + 8;
    const std::size_t to = fs + stance;
    const std::size_t frames = to + static_cast<std::size_t>(std::ceil(0.35 * sd)) + 8;
    trial.fs_frame = fs;
    trial.to_frame = to;
    trial.fs_sample = fs * kSubsamples;
    trial.to_sample = to * kSubsamples;

    // geometry is built for a right-limb stance and reflected for the left limb
    const double theta = side(recipe.stance_limb) * recipe.turn_angle * kPi / 180.0;
    const auto& sh = recipe.shape;
    const bool walk = recipe.kind == TrialKind::Walk;
    const double step = std::max(550.0, 1000.0 * recipe.approach_speed * recipe.stance_duration());
    const double width = 190.0 + 50.0 * sh[3];
    const double lift = 80.0 + 40.0 * sh[4];
    const double bounce = (walk ? 25.0 : 40.0) + (walk ? 12.0 : 15.0) * sh[2];
    const double toe_out = -(6.0 + 6.0 * sh[5]) * kPi / 180.0;
    const double per_frame = recipe.approach_speed * 1000.0 / kMarkerRate;

    Rng layout(derive_seed(recipe.seed, 3));
    const Vec2 anchor{layout.uniform(-50.0, 50.0), layout.uniform(-50.0, 50.0)};

    auto u_of = [&](double f) { return (f - static_cast<double>(fs)) / sd; };
    auto heading = [&](double f) { return theta * smoothstep(u_of(f)); };

    std::vector<Vec2> pelvis(frames);
    pelvis[fs] = {anchor.x, anchor.y + 0.5 * width};
    for (std::size_t f = fs; f + 1 < frames; ++f) {
        const Vec2 d = direction(heading(static_cast<double>(f) + 0.5));
        pelvis[f + 1] = {pelvis[f].x + per_frame * d.x, pelvis[f].y + per_frame * d.y};
    }
    for (std::size_t f = fs; f-- > 0;) {
        const Vec2 d = direction(heading(static_cast<double>(f) + 0.5));
        pelvis[f] = {pelvis[f + 1].x - per_frame * d.x, pelvis[f + 1].y - per_frame * d.y};
    }

    auto markers = MarkerTrajectorySet::with_frames(frames, kMarkerRate);
    for (std::size_t m = 0; m < kMarkerCount; ++m) markers.labels[m] = std::string(kCanonicalMarkers[m]);

    const Vec2 foot_dir = direction(toe_out);
    const Vec2 foot_left = direction(toe_out + 0.5 * kPi);
    const double contact_gap = recipe.contact == FootOrientation::Flat ? 0.0 : 40.0;

    for (std::size_t f = 0; f < frames; ++f) {
        const double u = u_of(static_cast<double>(f));
        const double h = heading(static_cast<double>(f));
        const Vec2 fwd = direction(h);
        const Vec2 left = direction(h + 0.5 * kPi);
        const Vec2& p = pelvis[f];

        const Vec3 sacr{p.x, p.y, kPelvisHeight - bounce * std::sin(kPi * u)};
        const double lean_x = 70.0 + 45.0 * sh[0] + 20.0 * std::sin(kPi * u);
        const double lean_y = (35.0 * sh[1] + 0.9 * theta * 180.0 / kPi) * smoothstep(u + 0.5);
        const Vec3 c7{sacr.x + lean_x * fwd.x + lean_y * left.x, sacr.y + lean_x * fwd.y + lean_y * left.y,
                      sacr.z + kTrunkHeight + 10.0 * std::cos(kPi * u)};

        // stance foot: swings in, stays planted over [0, 1], swings out along the new heading
        Vec2 foot = anchor;
        double foot_lift = 0.0;
        if (u < 0.0) {
            const double t = std::clamp(u + 1.0, 0.0, 1.0);
            foot = {anchor.x - step * (1.0 - smoothstep(t)), anchor.y};
            foot_lift = lift * std::sin(kPi * t);
        } else if (u > 1.0) {
            const double t = std::clamp(u - 1.0, 0.0, 1.0);
            const Vec2 out = direction(theta);
            foot = {anchor.x + step * smoothstep(t) * out.x, anchor.y + step * smoothstep(t) * out.y};
            foot_lift = lift * std::sin(kPi * t);
        }
        double settle = 1.0;
        if (u > 0.0) settle = u < 0.15 ? (1.0 - u / 0.15) * (1.0 - u / 0.15) : 0.0;
        double heel_rise = 0.0;
        if (u > 0.6) heel_rise = 50.0 * std::pow(std::min(u - 0.6, 0.4) / 0.4, 2.0);
        double cal_z = 40.0 + foot_lift + heel_rise;
        double mt1_z = 40.0 + foot_lift;
        if (recipe.contact == FootOrientation::HeelDown) cal_z += contact_gap * settle;
        if (recipe.contact == FootOrientation::ToeDown) mt1_z += contact_gap * settle;

        const Vec3 cal{foot.x - 0.5 * kFootLength * foot_dir.x, foot.y - 0.5 * kFootLength * foot_dir.y, cal_z};
        const Vec3 mt1{foot.x + 0.5 * kFootLength * foot_dir.x + 15.0 * foot_left.x,
                       foot.y + 0.5 * kFootLength * foot_dir.y + 15.0 * foot_left.y, mt1_z};
        const Vec3 lmal{foot.x - 0.35 * kFootLength * foot_dir.x - 35.0 * foot_left.x,
                        foot.y - 0.35 * kFootLength * foot_dir.y - 35.0 * foot_left.y, 75.0 + foot_lift + heel_rise};

        // swing foot travels beside the pelvis from behind to ahead of the stance foot
        const double reach = step * (0.9 * u - 0.45);
        const Vec2 sw{p.x + 0.5 * width * left.x + reach * fwd.x, p.y + 0.5 * width * left.y + reach * fwd.y};
        const double sw_lift = lift * std::sin(kPi * std::clamp(u, 0.0, 1.0));
        const Vec3 sw_cal{sw.x - 0.5 * kFootLength * fwd.x, sw.y - 0.5 * kFootLength * fwd.y, 40.0 + sw_lift};
        const Vec3 sw_mt1{sw.x + 0.5 * kFootLength * fwd.x - 15.0 * left.x,
                          sw.y + 0.5 * kFootLength * fwd.y - 15.0 * left.y, 40.0 + sw_lift};
        const Vec3 sw_lmal{sw.x - 0.35 * kFootLength * fwd.x + 35.0 * left.x,
                           sw.y - 0.35 * kFootLength * fwd.y + 35.0 * left.y, 75.0 + sw_lift};

        markers.at(f, kC7) = c7;
        markers.at(f, kSACR) = sacr;
        markers.at(f, kRMT1) = mt1;
        markers.at(f, kRCAL) = cal;
        markers.at(f, kRLMAL) = lmal;
        markers.at(f, kLMT1) = sw_mt1;
        markers.at(f, kLCAL) = sw_cal;
        markers.at(f, kLLMAL) = sw_lmal;
    }

    std::array<Vec2, 4> corners = {Vec2{anchor.x + kPlateHalfX, anchor.y + kPlateHalfY},
                                   Vec2{anchor.x - kPlateHalfX, anchor.y + kPlateHalfY},
                                   Vec2{anchor.x - kPlateHalfX, anchor.y - kPlateHalfY},
                                   Vec2{anchor.x + kPlateHalfX, anchor.y - kPlateHalfY}};

    if (recipe.stance_limb == Limb::Left) {
        auto mirrored = MarkerTrajectorySet::with_frames(frames, kMarkerRate);
        mirrored.labels = markers.labels;
        const std::array<std::size_t, kMarkerCount> swap = {kC7, kSACR, kRMT1, kLMT1, kRCAL, kLCAL, kRLMAL, kLLMAL};
        for (std::size_t f = 0; f < frames; ++f) {
            for (std::size_t m = 0; m < kMarkerCount; ++m) mirrored.at(f, m) = reflect(markers.at(f, swap[m]));
        }
        markers = std::move(mirrored);
        for (auto& c : corners) c.y = -c.y;
    }

    if (recipe.noise_sd > 0.0) {
        Rng noise(derive_seed(recipe.seed, 101));
        for (auto& v : markers.positions) {
            v.x += noise.normal(0.0, recipe.noise_sd);
            v.y += noise.normal(0.0, recipe.noise_sd);
            v.z += noise.normal(0.0, recipe.noise_sd);
        }
    }

    ForcePlateRecord plate;
    plate.rate = kAnalogRate;
    plate.corners = corners;
    const std::size_t samples = frames * kSubsamples;
    plate.channels.assign(samples * 6, 0.0);
    const auto span = static_cast<double>(trial.to_sample - trial.fs_sample);
    for (std::size_t i = trial.fs_sample; i < trial.to_sample; ++i) {
        const auto v = grfm_at(recipe, static_cast<double>(i - trial.fs_sample) / span);
        for (std::size_t c = 0; c < 6; ++c) plate.channels[i * 6 + c] = v[c];
    }
    if (recipe.force_noise_sd > 0.0) {
        Rng noise(derive_seed(recipe.seed, 102));
        for (auto& v : plate.channels) v += noise.normal(0.0, recipe.force_noise_sd);
    }

    auto& moments = trial.input.knee_moments[static_cast<std::size_t>(recipe.stance_limb)];
    moments.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        const auto v = kjm_at(recipe, u_of(static_cast<double>(f)));
        moments[f] = {v[0], v[1], v[2]};
    }
    trial.input.knee_moments[static_cast<std::size_t>(opposite(recipe.stance_limb))].assign(frames, Vec3{});
    trial.input.markers = std::move(markers);
    trial.input.plate = std::move(plate);
    return trial;
}

std::vector<TrialRecipe> draw_recipes(std::size_t n, TrialKind kind, std::uint64_t seed, const DrawOptions& options) {
    std::vector<TrialRecipe> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(draw_recipe(kind, derive_seed(seed, i + 1), options));
    return out;
}

std::vector<SyntheticSample> generate_dataset(std::size_t n, TrialKind kind, std::uint64_t seed,
                                              const DrawOptions& options) {
    if (n == 0) fail(ErrorCode::InvalidArgument, "dataset needs at least one trial");
    const auto recipes = draw_recipes(n, kind, seed, options);
    std::vector<SyntheticSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        SyntheticSample s;
        s.trial = generate_trial(recipes[i], source_id(kind, i));
        s.kjm = kjm_waveforms(recipes[i]);
        out.push_back(std::move(s));
    }
    return out;
}

std::string source_id(TrialKind kind, std::size_t index) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s_%06zu", to_string(kind), index);
    return buf;
}

c3d::File to_c3d(const SyntheticTrial& trial) {
    const auto& markers = trial.input.markers;
    const auto& plate = trial.input.plate;
    const std::size_t frames = markers.frame_count();
    const std::size_t points = kMarkerCount + 2;

    c3d::File file;
    auto& h = file.header;
    h.point_count = static_cast<int>(points);
    h.analog_channels = 6;
    h.analog_samples_per_frame = static_cast<int>(kSubsamples);
    h.first_frame = 1;
    h.last_frame = static_cast<int>(frames);
    h.point_scale = 1.0f;
    h.point_rate = static_cast<float>(kMarkerRate);

    std::vector<std::string> labels(kCanonicalMarkers.begin(), kCanonicalMarkers.end());
    labels.emplace_back("RKneeMoment");
    labels.emplace_back("LKneeMoment");
    const std::int16_t used = static_cast<std::int16_t>(points);
    const std::int16_t zero = 0;
    const float rate = static_cast<float>(kMarkerRate);
    const float scale = -1.0f;
    const auto frame_count = static_cast<std::int16_t>(std::min<std::size_t>(frames, 32767));
    file.set(c3d::ParameterRecord::int16s("POINT", "USED", {}, std::span(&used, 1)));
    file.set(c3d::ParameterRecord::strings("POINT", "LABELS", labels));
    file.set(c3d::ParameterRecord::floats("POINT", "RATE", {}, std::span(&rate, 1)));
    file.set(c3d::ParameterRecord::floats("POINT", "SCALE", {}, std::span(&scale, 1)));
    file.set(c3d::ParameterRecord::int16s("POINT", "FRAMES", {}, std::span(&frame_count, 1)));
    file.set(c3d::ParameterRecord::int16s("POINT", "DATA_START", {}, std::span(&zero, 1)));

    const std::int16_t analog_used = 6;
    const float analog_rate = static_cast<float>(kAnalogRate);
    const std::vector<std::string> analog_labels(kPlateChannelNames.begin(), kPlateChannelNames.end());
    const std::vector<float> ones(6, 1.0f);
    const std::vector<std::int16_t> offsets(6, 0);
    const float gen_scale = 1.0f;
    file.set(c3d::ParameterRecord::int16s("ANALOG", "USED", {}, std::span(&analog_used, 1)));
    file.set(c3d::ParameterRecord::strings("ANALOG", "LABELS", analog_labels));
    file.set(c3d::ParameterRecord::floats("ANALOG", "RATE", {}, std::span(&analog_rate, 1)));
    file.set(c3d::ParameterRecord::floats("ANALOG", "SCALE", {6}, ones));
    file.set(c3d::ParameterRecord::int16s("ANALOG", "OFFSET", {6}, offsets));
    file.set(c3d::ParameterRecord::floats("ANALOG", "GEN_SCALE", {}, std::span(&gen_scale, 1)));

    const std::int16_t plates = 1;
    const std::int16_t type = 2;
    const std::vector<std::int16_t> channel_map = {1, 2, 3, 4, 5, 6};
    std::vector<float> corners;
    for (const auto& c : plate.corners) {
        corners.push_back(static_cast<float>(c.x));
        corners.push_back(static_cast<float>(c.y));
        corners.push_back(0.0f);
    }
    const std::vector<float> origin = {0.0f, 0.0f, -40.0f};
    file.set(c3d::ParameterRecord::int16s("FORCE_PLATFORM", "USED", {}, std::span(&plates, 1)));
    file.set(c3d::ParameterRecord::int16s("FORCE_PLATFORM", "TYPE", {1}, std::span(&type, 1)));
    file.set(c3d::ParameterRecord::int16s("FORCE_PLATFORM", "CHANNEL", {6, 1}, channel_map));
    file.set(c3d::ParameterRecord::floats("FORCE_PLATFORM", "CORNERS", {3, 4, 1}, corners));
    file.set(c3d::ParameterRecord::floats("FORCE_PLATFORM", "ORIGIN", {3, 1}, origin));

    file.point_frames.resize(frames * points);
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t m = 0; m < kMarkerCount; ++m) {
            const auto& v = markers.at(f, m);
            file.point_frames[f * points + m] = {static_cast<float>(v.x), static_cast<float>(v.y),
                                                 static_cast<float>(v.z), 0.0f};
        }
        for (std::size_t limb = 0; limb < 2; ++limb) {
            // slot order in the label list is R then L
            const auto& series = trial.input.knee_moments[limb == 0 ? static_cast<std::size_t>(Limb::Right)
                                                                    : static_cast<std::size_t>(Limb::Left)];
            const Vec3 v = f < series.size() ? series[f] : Vec3{};
            file.point_frames[f * points + kMarkerCount + limb] = {static_cast<float>(v.x), static_cast<float>(v.y),
                                                                   static_cast<float>(v.z), 0.0f};
        }
    }
    file.analog_frames.resize(frames * kSubsamples * 6);
    for (std::size_t i = 0; i < file.analog_frames.size(); ++i) {
        file.analog_frames[i] = static_cast<float>(plate.channels[i]);
    }
    // settle the layout fields (data start block) the way the writer lays them out
    return c3d::parse(c3d::write(file));
}

}  // namespace kjm::synth
