#include "bmkn/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace bmkn {

namespace {
const char* kPartNames[kBodyPartCount] = {
    "Head",          "LeftUpperArm", "LeftLowerArm", "LeftHand",
    "RightUpperArm", "RightLowerArm", "RightHand",    "Torso",
    "LeftThigh",     "LeftLeg",      "LeftFoot",     "RightThigh",
    "RightLeg",      "RightFoot",
};
}  // namespace

const char* body_part_name(BodyPart p) {
  return kPartNames[static_cast<int>(p)];
}

BodyPart body_part_from_name(const std::string& name) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  const std::string want = lower(name);
  for (int i = 0; i < kBodyPartCount; ++i) {
    if (lower(kPartNames[i]) == want) return static_cast<BodyPart>(i);
  }
  throw ConfigError("unknown body part name: " + name);
}

void Mesh::validate() const {
  const size_t n = vertices.size();
  for (const Face& f : faces) {
    for (uint32_t idx : f) {
      if (idx >= n) {
        throw ParseError("face index " + std::to_string(idx) +
                         " out of range for " + std::to_string(n) +
                         " vertices");
      }
    }
  }
  if (labels && labels->size() != n) {
    throw LabelMismatch("label count " + std::to_string(labels->size()) +
                        " != vertex count " + std::to_string(n));
  }
}

double Mesh::bbox_diagonal() const {
  if (vertices.empty()) return 0.0;
  Vec3 lo = vertices.front(), hi = vertices.front();
  for (const Vec3& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

double rmse_distortion(const Mesh& a, const Mesh& b) {
  if (a.vertex_count() != b.vertex_count()) {
    throw ShapeMismatch("vertex counts differ: " +
                        std::to_string(a.vertex_count()) + " vs " +
                        std::to_string(b.vertex_count()));
  }
  if (a.vertices.empty()) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < a.vertices.size(); ++i) {
    sum += (a.vertices[i] - b.vertices[i]).squaredNorm();
  }
  const double rms = std::sqrt(sum / static_cast<double>(a.vertices.size()));
  const double diag = b.bbox_diagonal();
  return diag > 0.0 ? rms / diag : rms;
}

}  // namespace bmkn
