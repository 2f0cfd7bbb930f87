#include "bmkn/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "bmkn/affine.hpp"

namespace bmkn {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

// mt19937_64 output mapped to [lo, hi) without std distributions, which are
// implementation-defined.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) {
    const double u = double(gen() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }
};

struct Builder {
  Mesh mesh;
  std::vector<BodyPart> labels;

  // Capped tube from p0 to p1; vertices ring by ring plus two apexes.
  void tube(BodyPart part, const Vec3& p0, const Vec3& p1, double radius,
            int nseg, int nring) {
    const uint32_t base = uint32_t(mesh.vertices.size());
    const Vec3 axis = p1 - p0;
    const Vec3 dir = axis.normalized();
    const Vec3 ref =
        std::abs(dir.y()) < 0.9 ? Vec3(0, 1, 0) : Vec3(1, 0, 0);
    const Vec3 u = dir.cross(ref).normalized();
    const Vec3 v = dir.cross(u);

    for (int ring = 0; ring <= nring; ++ring) {
      const Vec3 c = p0 + (double(ring) / double(nring)) * axis;
      for (int s = 0; s < nseg; ++s) {
        const double a = kTau * double(s) / double(nseg);
        mesh.vertices.push_back(c + radius * (std::cos(a) * u + std::sin(a) * v));
        labels.push_back(part);
      }
    }
    const uint32_t cap0 = uint32_t(mesh.vertices.size());
    mesh.vertices.push_back(p0 - 0.6 * radius * dir);
    labels.push_back(part);
    const uint32_t cap1 = uint32_t(mesh.vertices.size());
    mesh.vertices.push_back(p1 + 0.6 * radius * dir);
    labels.push_back(part);

    auto rv = [&](int ring, int s) {
      return base + uint32_t(ring * nseg + (s % nseg));
    };
    for (int ring = 0; ring < nring; ++ring) {
      for (int s = 0; s < nseg; ++s) {
        mesh.faces.push_back({rv(ring, s), rv(ring + 1, s), rv(ring, s + 1)});
        mesh.faces.push_back({rv(ring, s + 1), rv(ring + 1, s), rv(ring + 1, s + 1)});
      }
    }
    for (int s = 0; s < nseg; ++s) {
      mesh.faces.push_back({cap0, rv(0, s), rv(0, s + 1)});
      mesh.faces.push_back({cap1, rv(nring, s + 1), rv(nring, s)});
    }
  }
};

struct Joint {
  Vec3 pivot;
  double amplitude = 0.0;
  double phase = 0.0;
  double bias = 0.0;

  // rotation about the x axis, walking-style sagittal swing
  double angle(double t) const { return bias + amplitude * std::sin(t + phase); }
};

struct Rig {
  Mesh base;                        // T-pose with labels
  Vec3 torso_centroid = Vec3::Zero();
  Joint shoulder_l, shoulder_r, elbow_l, elbow_r;
  Joint hip_l, hip_r, knee_l, knee_r;
  double bob_amp = 0.0;
  double stride = 0.0;  // forward drift per frame
};

Rig build_rig(int density, Rng& rng) {
  const int nseg = density;
  Builder b;

  const Vec3 pelvis(0, 1.00, 0), neck(0, 1.50, 0), head_top(0, 1.78, 0);
  const double sx = 0.18;  // shoulder offset (left = +x)
  const Vec3 shoulder_l(sx, 1.42, 0), elbow_l(0.40, 1.14, 0),
      wrist_l(0.54, 0.90, 0), hand_l(0.60, 0.78, 0);
  const Vec3 shoulder_r(-sx, 1.42, 0), elbow_r(-0.40, 1.14, 0),
      wrist_r(-0.54, 0.90, 0), hand_r(-0.60, 0.78, 0);
  const Vec3 hip_l(0.10, 0.98, 0), knee_l(0.10, 0.52, 0),
      ankle_l(0.10, 0.10, 0), toe_l(0.10, 0.05, 0.16);
  const Vec3 hip_r(-0.10, 0.98, 0), knee_r(-0.10, 0.52, 0),
      ankle_r(-0.10, 0.10, 0), toe_r(-0.10, 0.05, 0.16);

  b.tube(BodyPart::Head, neck + Vec3(0, 0.06, 0), head_top, 0.10, nseg, 3);
  b.tube(BodyPart::LeftUpperArm, shoulder_l, elbow_l, 0.050, nseg, 4);
  b.tube(BodyPart::LeftLowerArm, elbow_l, wrist_l, 0.045, nseg, 3);
  b.tube(BodyPart::LeftHand, wrist_l, hand_l, 0.040, nseg, 2);
  b.tube(BodyPart::RightUpperArm, shoulder_r, elbow_r, 0.050, nseg, 4);
  b.tube(BodyPart::RightLowerArm, elbow_r, wrist_r, 0.045, nseg, 3);
  b.tube(BodyPart::RightHand, wrist_r, hand_r, 0.040, nseg, 2);
  b.tube(BodyPart::Torso, pelvis, neck, 0.15, nseg, 6);
  b.tube(BodyPart::LeftThigh, hip_l, knee_l, 0.070, nseg, 4);
  b.tube(BodyPart::LeftLeg, knee_l, ankle_l, 0.050, nseg, 4);
  b.tube(BodyPart::LeftFoot, ankle_l, toe_l, 0.040, nseg, 2);
  b.tube(BodyPart::RightThigh, hip_r, knee_r, 0.070, nseg, 4);
  b.tube(BodyPart::RightLeg, knee_r, ankle_r, 0.050, nseg, 4);
  b.tube(BodyPart::RightFoot, ankle_r, toe_r, 0.040, nseg, 2);

  Rig rig;
  rig.base = std::move(b.mesh);
  rig.base.labels = std::move(b.labels);

  Vec3 sum = Vec3::Zero();
  int count = 0;
  for (size_t i = 0; i < rig.base.vertex_count(); ++i) {
    if ((*rig.base.labels)[i] == BodyPart::Torso) {
      sum += rig.base.vertices[i];
      ++count;
    }
  }
  rig.torso_centroid = sum / double(count);

  const double swing = rng.uniform(0.30, 0.45);
  const double leg = rng.uniform(0.25, 0.40);
  const double elbow = rng.uniform(0.15, 0.30);
  const double knee = rng.uniform(0.20, 0.35);
  rig.shoulder_l = {shoulder_l, swing, 0.0};
  rig.shoulder_r = {shoulder_r, swing, std::numbers::pi};
  rig.elbow_l = {elbow_l, elbow, 0.4, -0.5 * elbow};
  rig.elbow_r = {elbow_r, elbow, 0.4 + std::numbers::pi, -0.5 * elbow};
  rig.hip_l = {hip_l, leg, std::numbers::pi};
  rig.hip_r = {hip_r, leg, 0.0};
  rig.knee_l = {knee_l, knee, std::numbers::pi - 0.6, 0.5 * knee};
  rig.knee_r = {knee_r, knee, -0.6, 0.5 * knee};
  rig.bob_amp = rng.uniform(0.008, 0.015);
  rig.stride = rng.uniform(0.004, 0.008);
  return rig;
}

Vec3 rotate_about(const Vec3& p, const Joint& joint, double t) {
  const double a = joint.angle(t);
  const double c = std::cos(a), s = std::sin(a);
  const Vec3 d = p - joint.pivot;
  return joint.pivot + Vec3(d.x(), c * d.y() - s * d.z(), s * d.y() + c * d.z());
}

Mesh walker_frame(const Rig& rig, int k, double period, double swish_amp) {
  const double t = kTau * double(k) / period;
  Mesh frame = rig.base;

  Mat3 torso_warp = Mat3::Identity();
  if (swish_amp != 0.0) {
    TransformParams warp;
    warp.scale_resid = Vec3(swish_amp * std::sin(t),
                            0.0,
                            0.6 * swish_amp * std::sin(t + 1.0));
    warp.shear = Vec3(0.5 * swish_amp * std::sin(t + 0.7), 0.0, 0.0);
    torso_warp = compose(warp);
  }

  const Vec3 root(0.0, rig.bob_amp * std::sin(2.0 * t), rig.stride * double(k));
  for (size_t i = 0; i < frame.vertex_count(); ++i) {
    Vec3 p = frame.vertices[i];
    switch ((*frame.labels)[i]) {
      case BodyPart::LeftUpperArm:
        p = rotate_about(p, rig.shoulder_l, t);
        break;
      case BodyPart::LeftLowerArm:
      case BodyPart::LeftHand:
        p = rotate_about(p, rig.elbow_l, t);
        p = rotate_about(p, rig.shoulder_l, t);
        break;
      case BodyPart::RightUpperArm:
        p = rotate_about(p, rig.shoulder_r, t);
        break;
      case BodyPart::RightLowerArm:
      case BodyPart::RightHand:
        p = rotate_about(p, rig.elbow_r, t);
        p = rotate_about(p, rig.shoulder_r, t);
        break;
      case BodyPart::LeftThigh:
        p = rotate_about(p, rig.hip_l, t);
        break;
      case BodyPart::LeftLeg:
      case BodyPart::LeftFoot:
        p = rotate_about(p, rig.knee_l, t);
        p = rotate_about(p, rig.hip_l, t);
        break;
      case BodyPart::RightThigh:
        p = rotate_about(p, rig.hip_r, t);
        break;
      case BodyPart::RightLeg:
      case BodyPart::RightFoot:
        p = rotate_about(p, rig.knee_r, t);
        p = rotate_about(p, rig.hip_r, t);
        break;
      case BodyPart::Torso:
        p = rig.torso_centroid + torso_warp * (p - rig.torso_centroid);
        break;
      case BodyPart::Head:
      default:
        break;
    }
    frame.vertices[i] = p + root;
  }
  return frame;
}

}  // namespace

Sequence synthesize(const SynthConfig& cfg) {
  if (cfg.frames < 1) throw ConfigError("frame count must be >= 1");
  if (cfg.density < 4) throw ConfigError("density must be >= 4");

  Rng rng(cfg.seed);
  const Rig rig = build_rig(cfg.density, rng);

  Sequence seq;
  if (cfg.scenario == "walker" || cfg.scenario == "swish") {
    const double amp = cfg.scenario == "swish" ? cfg.amplitude : 0.0;
    for (int k = 0; k < cfg.frames; ++k) {
      seq.frames.push_back(walker_frame(rig, k, cfg.period, amp));
    }
  } else if (cfg.scenario == "drift") {
    for (int k = 0; k < cfg.frames; ++k) {
      Mesh frame = rig.base;
      const Vec3 offset = double(k) * cfg.velocity;
      for (Vec3& v : frame.vertices) v += offset;
      seq.frames.push_back(std::move(frame));
    }
  } else {
    throw UnknownScenario("unknown scenario: " + cfg.scenario);
  }
  return seq;
}

}  // namespace bmkn
