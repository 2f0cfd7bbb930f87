#include "bmkn/affine.hpp"

#include <cmath>

namespace bmkn {

std::string CombinationMask::code() const {
  std::string s = "0000";
  if (r_on) s[0] = '1';
  if (t_on) s[1] = '1';
  if (s_on) s[2] = '1';
  if (h_on) s[3] = '1';
  return s;
}

std::string CombinationMask::name() const {
  std::string s;
  if (r_on) s += 'R';
  if (t_on) s += 'T';
  if (s_on) s += 'S';
  if (h_on) s += 'H';
  return s;
}

CombinationMask CombinationMask::from_code_value(uint8_t code) {
  if (code > 0x0f) throw ConfigError("mask code out of range");
  return {bool(code & 8), bool(code & 4), bool(code & 2), bool(code & 1)};
}

CombinationMask CombinationMask::from_name(const std::string& name) {
  CombinationMask m{false, false, false, false};
  for (char c : name) {
    switch (c) {
      case 'R': case 'r': m.r_on = true; break;
      case 'T': case 't': m.t_on = true; break;
      case 'S': case 's': m.s_on = true; break;
      case 'H': case 'h': m.h_on = true; break;
      default: throw ConfigError(std::string("bad mask letter: ") + c);
    }
  }
  return m;
}

const std::vector<CombinationMask>& CombinationMask::legal_masks() {
  static const std::vector<CombinationMask> masks = [] {
    std::vector<CombinationMask> out;
    for (uint8_t code = 0; code <= 0x0f; ++code) {
      CombinationMask m = from_code_value(code);
      if (m.t_on) out.push_back(m);
    }
    return out;  // ascending code value: T, TH, TS, TSH, RT, RTH, RTS, RTSH
  }();
  return masks;
}

Mat3 rotation_from_euler(double tx, double ty, double tz) {
  const double cx = std::cos(tx), sx = std::sin(tx);
  const double cy = std::cos(ty), sy = std::sin(ty);
  const double cz = std::cos(tz), sz = std::sin(tz);
  Mat3 rx, ry, rz;
  rx << 1, 0, 0,
        0, cx, -sx,
        0, sx, cx;
  ry << cy, 0, sy,
        0, 1, 0,
        -sy, 0, cy;
  rz << cz, -sz, 0,
        sz, cz, 0,
        0, 0, 1;
  return rz * ry * rx;
}

Mat3 compose(const TransformParams& params) {
  Eigen::Vector3d scale = params.scale_resid.array() + 1.0;
  if (scale.minCoeff() <= 0.0) {
    throw NonPositiveScale("scale component <= 0 in compose()");
  }
  Mat3 s = scale.asDiagonal();
  Mat3 h = Mat3::Identity();
  h(0, 1) = params.shear.x();  // h_xy
  h(0, 2) = params.shear.y();  // h_xz
  h(1, 2) = params.shear.z();  // h_yz
  return rotation_from_euler(params.euler) * s * h;
}

TransformParams decompose(const Mat3& a, bool* gimbal_lock) {
  const double det = a.determinant();
  if (!(det > 1e-12)) {
    throw SingularMatrix("decompose() requires det(A) > 0, got " +
                         std::to_string(det));
  }

  // Gram-Schmidt on the columns gives A = R * U with U upper triangular and
  // a positive diagonal, which is exactly R * S * H with S = diag(U).
  const Eigen::Vector3d a1 = a.col(0), a2 = a.col(1), a3 = a.col(2);
  const double u11 = a1.norm();
  const Eigen::Vector3d r1 = a1 / u11;
  const double u12 = r1.dot(a2);
  Eigen::Vector3d v2 = a2 - u12 * r1;
  const double u22 = v2.norm();
  const Eigen::Vector3d r2 = v2 / u22;
  const double u13 = r1.dot(a3);
  const double u23 = r2.dot(a3);
  Eigen::Vector3d v3 = a3 - u13 * r1 - u23 * r2;
  const double u33 = v3.norm();
  const Eigen::Vector3d r3 = v3 / u33;

  TransformParams p;
  p.scale_resid = Eigen::Vector3d(u11 - 1.0, u22 - 1.0, u33 - 1.0);
  p.shear = Eigen::Vector3d(u12 / u11, u13 / u11, u23 / u22);

  Mat3 r;
  r.col(0) = r1;
  r.col(1) = r2;
  r.col(2) = r3;

  // R = Rz*Ry*Rx  =>  R(2,0) = -sin(ty).
  const double sy = -r(2, 0);
  const double ty = std::asin(std::clamp(sy, -1.0, 1.0));
  const double cy = std::cos(ty);
  bool lock = std::abs(cy) < 1e-9;
  double tx, tz;
  if (!lock) {
    tx = std::atan2(r(2, 1), r(2, 2));
    tz = std::atan2(r(1, 0), r(0, 0));
  } else {
    // theta_x := 0; with sin(ty) = +-1 the matrix depends only on the
    // combined angle, which theta_z absorbs.
    tx = 0.0;
    tz = std::atan2(-r(0, 1), r(1, 1));
  }
  if (gimbal_lock) *gimbal_lock = lock;
  p.euler = Eigen::Vector3d(tx, ty, tz);
  return p;
}

TransformParams mask_params(const TransformParams& params,
                            const CombinationMask& mask) {
  TransformParams out = params;
  if (!mask.r_on) out.euler.setZero();
  if (!mask.t_on) out.translation.setZero();
  if (!mask.s_on) out.scale_resid.setZero();
  if (!mask.h_on) out.shear.setZero();
  return out;
}

}  // namespace bmkn
