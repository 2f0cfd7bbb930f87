#include <doctest.h>

#include "bmkn/affine.hpp"
#include "oracles.hpp"

using namespace bmkn;

TEST_CASE("rotation_from_euler basics") {
  CHECK((rotation_from_euler(0, 0, 0) - Mat3::Identity()).norm() == 0.0);

  // Rz(pi/2) has exact cos/sin values.
  Mat3 expect;
  expect << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Mat3 r = rotation_from_euler(0, 0, M_PI / 2);
  CHECK((r - expect).norm() < 1e-15);

  oracle::Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    const Mat3 m = rotation_from_euler(rng.uni(-3.1, 3.1), rng.uni(-3.1, 3.1),
                                       rng.uni(-3.1, 3.1));
    CHECK((m.transpose() * m - Mat3::Identity()).norm() < 1e-12);
    CHECK(std::abs(m.determinant() - 1.0) < 1e-12);
  }
}

TEST_CASE("compose matches the explicit three-matrix product") {
  CHECK((compose(TransformParams{}) - Mat3::Identity()).norm() == 0.0);

  TransformParams scale2;
  scale2.scale_resid = {1.0, 0.0, 0.0};
  const Mat3 d = compose(scale2);
  CHECK(d(0, 0) == 2.0);
  CHECK(d(1, 1) == 1.0);
  CHECK(d(2, 2) == 1.0);
  CHECK(std::abs(d(0, 1)) + std::abs(d(0, 2)) + std::abs(d(1, 0)) == 0.0);

  oracle::Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const TransformParams p = oracle::random_params(rng);
    const oracle::M33 want = oracle::compose(p, CombinationMask::full());
    const Mat3 got = compose(p);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(got(r, c) - want[size_t(r)][size_t(c)]) < 1e-12);
      }
    }
  }

  TransformParams bad;
  bad.scale_resid = {-1.0, 0, 0};
  CHECK_THROWS_AS((void)compose(bad), NonPositiveScale);
}

TEST_CASE("decompose recovers parameters away from gimbal lock") {
  const TransformParams id = decompose(Mat3::Identity());
  CHECK(id.euler.norm() == 0.0);
  CHECK(id.scale_resid.norm() == 0.0);
  CHECK(id.shear.norm() == 0.0);

  oracle::Rng rng(99);
  for (int i = 0; i < 500; ++i) {
    TransformParams p0 = oracle::random_params(rng);
    p0.translation.setZero();
    const Mat3 a = compose(p0);
    const TransformParams p = decompose(a);
    CHECK((p.euler - p0.euler).norm() < 1e-9);
    CHECK((p.scale_resid - p0.scale_resid).norm() < 1e-9);
    CHECK((p.shear - p0.shear).norm() < 1e-9);
    CHECK((compose(p) - a).norm() < 1e-9);
  }

  Mat3 mirrored = Mat3::Identity();
  mirrored(0, 0) = -1.0;
  CHECK_THROWS_AS((void)decompose(mirrored), SingularMatrix);
  CHECK_THROWS_AS((void)decompose(Mat3::Zero()), SingularMatrix);
}

TEST_CASE("decompose flags and resolves gimbal lock") {
  TransformParams p;
  p.euler = {0.3, M_PI / 2, -0.2};
  const Mat3 a = compose(p);
  bool lock = false;
  const TransformParams q = decompose(a, &lock);
  CHECK(lock);
  CHECK(q.euler.x() == 0.0);
  CHECK((compose(q) - a).norm() < 1e-9);
}

TEST_CASE("mask_params identity substitution") {
  oracle::Rng rng(5);
  const TransformParams p = oracle::random_params(rng);

  CHECK(mask_params(p, CombinationMask::full()) == p);

  const TransformParams t_only =
      mask_params(p, CombinationMask::translation_only());
  CHECK(t_only.euler.norm() == 0.0);
  CHECK(t_only.scale_resid.norm() == 0.0);
  CHECK(t_only.shear.norm() == 0.0);
  CHECK(t_only.translation == p.translation);
  CHECK((compose(t_only) - Mat3::Identity()).norm() == 0.0);

  // RT mask acts as a rigid transform.
  const TransformParams rt = mask_params(p, CombinationMask::rigid());
  const oracle::M33 r_oracle =
      oracle::rotation(p.euler.x(), p.euler.y(), p.euler.z());
  const oracle::V3 x = {0.3, -0.7, 0.2};
  const oracle::V3 rx = oracle::apply(r_oracle, x);
  const Vec3 got = compose(rt) * Vec3(x[0], x[1], x[2]) + rt.translation;
  const Vec3 want(rx[0] + p.translation.x(), rx[1] + p.translation.y(),
                  rx[2] + p.translation.z());
  CHECK((got - want).norm() < 1e-12);

  // idempotent
  CHECK(mask_params(rt, CombinationMask::rigid()) == rt);
}

TEST_CASE("the 8 legal masks") {
  const auto& masks = CombinationMask::legal_masks();
  REQUIRE(masks.size() == 8);
  std::vector<std::string> names;
  for (const auto& m : masks) {
    CHECK(m.t_on);
    names.push_back(m.name());
    CHECK(CombinationMask::from_code_value(m.code_value()) == m);
  }
  const std::vector<std::string> want = {"T",  "TH",  "TS",  "TSH",
                                         "RT", "RTH", "RTS", "RTSH"};
  CHECK(names == want);

  const CombinationMask rsh = CombinationMask::from_name("RSH");
  CHECK(rsh.code() == "1011");
  CHECK(rsh.name() == "RSH");
}
