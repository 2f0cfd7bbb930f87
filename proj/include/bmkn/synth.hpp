#pragma once

#include <cstdint>
#include <string>

#include "bmkn/mesh.hpp"

namespace bmkn {

/// Deterministic labeled test sequences:
///   walker - 14-part capsule humanoid with scripted limb rotations
///   swish  - walker plus torso scale/shear oscillation (loose-clothing
///            analogue; amplitude 0 reduces to walker)
///   drift  - static pose translated by a constant per-frame velocity
struct SynthConfig {
  std::string scenario = "walker";
  int frames = 16;
  uint64_t seed = 1;
  double amplitude = 0.2;                    // swish oscillation strength
  Vec3 velocity = Vec3(0.01, 0.004, -0.006); // drift per-frame translation
  int density = 8;                           // radial segments per capsule
  double period = 16.0;                      // gait period, frames
};

/// Throws UnknownScenario for unrecognized scenario names.
Sequence synthesize(const SynthConfig& cfg);

}  // namespace bmkn
