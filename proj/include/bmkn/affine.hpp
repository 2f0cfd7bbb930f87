#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "bmkn/errors.hpp"

namespace bmkn {

using Mat3 = Eigen::Matrix3d;

/// Subset of {R, T, S, H} components enabled for affine nodes. The wire code
/// packs the flags as a 4-bit value in R,T,S,H order (e.g. "1011" = RSH).
struct CombinationMask {
  bool r_on = true;
  bool t_on = true;
  bool s_on = true;
  bool h_on = true;

  uint8_t code_value() const {
    return uint8_t((r_on << 3) | (t_on << 2) | (s_on << 1) | (h_on << 0));
  }
  std::string code() const;   // e.g. "1011"
  std::string name() const;   // e.g. "RSH"
  int enabled_count() const { return int(r_on) + int(t_on) + int(s_on) + int(h_on); }

  static CombinationMask from_code_value(uint8_t code);
  static CombinationMask from_name(const std::string& name);

  /// Rigid nodes always use rotation + translation.
  static CombinationMask rigid() { return {true, true, false, false}; }
  static CombinationMask full() { return {true, true, true, true}; }
  static CombinationMask translation_only() { return {false, true, false, false}; }

  /// The 8 legal masks (translation always enabled), ascending by code value.
  static const std::vector<CombinationMask>& legal_masks();

  bool operator==(const CombinationMask&) const = default;
};

/// Decomposed per-node motion. Disabled components hold their identity
/// encoding: zero angles, zero translation, zero scale residuals (scale 1),
/// zero shears.
struct TransformParams {
  Eigen::Vector3d euler = Eigen::Vector3d::Zero();        // radians, x/y/z
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // model units
  Eigen::Vector3d scale_resid = Eigen::Vector3d::Zero();  // s - 1
  Eigen::Vector3d shear = Eigen::Vector3d::Zero();        // h_xy, h_xz, h_yz

  bool operator==(const TransformParams&) const = default;
};

/// R = Rz(tz) * Ry(ty) * Rx(tx); always orthonormal with det +1.
Mat3 rotation_from_euler(double tx, double ty, double tz);
inline Mat3 rotation_from_euler(const Eigen::Vector3d& e) {
  return rotation_from_euler(e.x(), e.y(), e.z());
}

/// A = R * diag(1 + scale_resid) * unit_upper_triangular(shear).
/// Throws NonPositiveScale if any 1 + scale_resid <= 0.
Mat3 compose(const TransformParams& params);

/// Inverse of compose for det(A) > 0: orthogonal x upper-triangular
/// factorization with positive diagonal, then S = diag(U), H = S^-1 U and
/// Euler angles on the asin(-A(2,0)) branch in (-pi/2, pi/2).
/// Near the Euler singularity (|cos ty| < 1e-9) theta_x is set to 0, theta_z
/// absorbs the remaining rotation, and *gimbal_lock is set when provided.
/// Throws SingularMatrix when det(A) <= 0 or |det| < 1e-12.
TransformParams decompose(const Mat3& a, bool* gimbal_lock = nullptr);

/// Replaces disabled components with their identity encodings.
TransformParams mask_params(const TransformParams& params,
                            const CombinationMask& mask);

}  // namespace bmkn
