#pragma once

#include <string>
#include <vector>

#include "pointattn/pipeline.hpp"

namespace pointattn::synth {

enum class SceneClass { kGround, kRoof, kFacade, kTree, kCar, kPowerline };

SceneClass scene_class_from_name(const std::string& name);
std::string scene_class_name(SceneClass c);

// Deterministic test scene: labels are exact by construction, geometry is
// deliberately simple. Point labels are indices into `classes`.
struct SceneSpec {
    double extent = 20.0;   // square side, meters
    std::vector<SceneClass> classes = {SceneClass::kGround};
    double density = 16.0;  // points per square meter of surface
    double noise_sigma = 0.02;
    std::uint64_t seed = 1;

    void validate() const;
};

std::vector<pipeline::PointRecord> generate(const SceneSpec& spec);

}  // namespace pointattn::synth
