#pragma once

#include <cstdint>
#include <vector>

#include "kjm/synthetic.hpp"
#include "kjm/trial_prep.hpp"

namespace kjm::testing {

struct OracleData {
    Dataset kjm;
    Dataset grfm;
    HygieneLog rejects;
    std::size_t generated = 0;
    std::size_t scripted_crossovers = 0;
};

/// Right-stance oracle trials of one kind run through the in-memory prep path.
inline OracleData oracle_dataset(std::size_t n, synth::TrialKind kind, std::uint64_t seed,
                                 const synth::DrawOptions& draw = {}) {
    OracleData out;
    out.generated = n;
    std::vector<TrialSample> samples;
    const auto recipes = synth::draw_recipes(n, kind, seed, draw);
    for (std::size_t i = 0; i < recipes.size(); ++i) {
        const auto trial = synth::generate_trial(recipes[i], synth::source_id(kind, i));
        if (trial.expected_movement == Movement::Crossover) ++out.scripted_crossovers;
        samples.push_back(prepare_trial(trial.input));
    }
    Movement movement = Movement::Walk;
    for (const auto& s : samples) {
        if (s.movement != Movement::Crossover) {
            movement = s.movement;
            break;
        }
    }
    out.kjm = assemble_dataset(samples, movement, draw.stance_limb, ResponseKind::KJM, &out.rejects);
    out.grfm = assemble_dataset(samples, movement, draw.stance_limb, ResponseKind::GRFM);
    return out;
}

}  // namespace kjm::testing
