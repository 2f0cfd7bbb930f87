#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bmkn/errors.hpp"

namespace bmkn {

using Vec3 = Eigen::Vector3d;
using Face = std::array<uint32_t, 3>;

/// Body segmentation labels. The ordinal order doubles as the component
/// traversal order used by spatial predictive coding, so it must not change.
enum class BodyPart : uint8_t {
  Head = 0,
  LeftUpperArm,
  LeftLowerArm,
  LeftHand,
  RightUpperArm,
  RightLowerArm,
  RightHand,
  Torso,
  LeftThigh,
  LeftLeg,
  LeftFoot,
  RightThigh,
  RightLeg,
  RightFoot,
};

inline constexpr int kBodyPartCount = 14;

const char* body_part_name(BodyPart p);
/// Parses a part name (case-insensitive, e.g. "torso"); throws ConfigError.
BodyPart body_part_from_name(const std::string& name);

/// Triangle mesh for one frame. Immutable by convention after construction.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::optional<std::vector<BodyPart>> labels;

  size_t vertex_count() const { return vertices.size(); }

  /// Checks face indices and label length; throws ParseError / LabelMismatch.
  void validate() const;

  /// Axis-aligned bounding box diagonal length; 0 for empty meshes.
  double bbox_diagonal() const;
};

/// An ordered run of frames. Frames may differ in vertex count and topology.
struct Sequence {
  std::vector<Mesh> frames;
  double frame_rate = 30.0;
};

enum class SegMode : uint8_t { Off = 0, Auto = 1, Manual = 2 };

struct SegmentationConfig {
  SegMode mode = SegMode::Auto;
  std::set<BodyPart> affine_parts = {BodyPart::Torso};
};

/// Root-mean-square per-vertex error normalized by the bounding-box diagonal
/// of `b`. Requires equal vertex counts (throws ShapeMismatch).
double rmse_distortion(const Mesh& a, const Mesh& b);

}  // namespace bmkn
