// SPDX-License-Identifier: Apache-2.0
#include "spiketrack/geometry.hpp"

#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "test_support.hpp"

namespace st = spiketrack;
namespace sim = spiketrack::sim;

namespace {

sim::HoleWorld single_hole(double trigger_depth) {
  sim::HoleWorld w;
  w.holes = {{{10.0, 20.0}, 3.0}};
  w.trigger_depth_mm = trigger_depth;
  return w;
}

st::CollisionConfig fixed_threshold(double thr) {
  st::CollisionConfig c;
  c.count_threshold = thr;
  return c;
}

// Rotation angle recovered through an SVD of the cross-covariance.
double svd_angle(const std::vector<st::Vec2>& a, const std::vector<st::Vec2>& b) {
  Eigen::Vector2d ca = Eigen::Vector2d::Zero(), cb = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca += Eigen::Vector2d(a[i].x, a[i].y);
    cb += Eigen::Vector2d(b[i].x, b[i].y);
  }
  ca /= double(a.size());
  cb /= double(b.size());
  Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) {
    h += (Eigen::Vector2d(a[i].x, a[i].y) - ca) * (Eigen::Vector2d(b[i].x, b[i].y) - cb).transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
  d(1, 1) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Eigen::Matrix2d r = svd.matrixV() * d * svd.matrixU().transpose();
  return std::atan2(r(1, 0), r(0, 0));
}

double angle_diff(double a, double b) {
  return std::abs(std::remainder(a - b, 2.0 * std::numbers::pi));
}

std::vector<st::Vec2> transform(const std::vector<st::Vec2>& pts, double angle, st::Vec2 t) {
  const st::Rotation2 r{angle};
  std::vector<st::Vec2> out;
  for (const auto& p : pts) out.push_back(r.apply(p) + t);
  return out;
}

std::vector<st::Vec2> random_points(std::mt19937_64& rng, std::size_t n, double scale = 50.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<st::Vec2> out(n);
  for (auto& p : out) p = {u(rng), u(rng)};
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(CrossSearch, IdealPointProbeIsExact) {
  const auto w = single_hole(0.0);
  st::ProbeSpec p;
  p.diameter_mm = 1e-9;
  p.delta_crit_mm = 0.0;
  p.step_mm = 1e-5;
  const auto est = st::cross_search(w, {9.0, 19.0}, p, fixed_threshold(10.0));
  EXPECT_NEAR(est.x_c, 10.0, 1e-4);
  EXPECT_NEAR(est.y_c, 20.0, 1e-4);
  EXPECT_NEAR(est.r_real, 3.0, 1e-4);
  EXPECT_EQ(est.hole_index, 0u);
}

TEST(CrossSearch, RadiusCompensation) {
  const auto w = single_hole(0.4);
  st::ProbeSpec p;
  p.step_mm = 1e-5;
  const auto est = st::cross_search(w, {9.0, 19.0}, p, fixed_threshold(10.0));
  EXPECT_NEAR(est.r_measured, 3.025, 1e-4);
  EXPECT_NEAR(est.r_real, 3.000, 1e-4);
  EXPECT_NEAR(st::radius_offset_mm(p), 0.375, 1e-15);
  EXPECT_NEAR(st::compensated_radius(3.025, p), 3.0, 1e-12);
}

TEST(CrossSearch, ContactPointsFollowAxisOrder) {
  const auto w = single_hole(0.4);
  st::ProbeSpec p;
  p.step_mm = 1e-4;
  const auto est = st::cross_search(w, {9.0, 19.0}, p, fixed_threshold(10.0));
  EXPECT_GT(est.contact_points[0].x, 10.0);
  EXPECT_LT(est.contact_points[1].x, 10.0);
  EXPECT_GT(est.contact_points[2].y, 20.0);
  EXPECT_LT(est.contact_points[3].y, 20.0);
  EXPECT_DOUBLE_EQ(est.x_c, (est.contact_points[0].x + est.contact_points[1].x) / 2.0);
  EXPECT_DOUBLE_EQ(est.y_c, (est.contact_points[2].y + est.contact_points[3].y) / 2.0);
  EXPECT_NEAR(est.contact_points[2].x, est.x_c, 1e-12);
  EXPECT_GT(est.r_real, 0.0);
}

TEST(CrossSearch, StartPointInvariance) {
  const auto w = single_hole(0.4);
  const st::ProbeSpec p;
  std::mt19937_64 rng(5);
  const auto ref = st::cross_search(w, {10.0, 20.0}, p, fixed_threshold(10.0));
  for (int i = 0; i < 100; ++i) {
    const auto start = st::random_start(w.holes[0], p, rng);
    const auto est = st::cross_search(w, start, p, fixed_threshold(10.0));
    EXPECT_NEAR(est.x_c, ref.x_c, p.step_mm);
    EXPECT_NEAR(est.y_c, ref.y_c, p.step_mm);
    EXPECT_NEAR(est.r_real, ref.r_real, p.step_mm);
    EXPECT_NEAR(est.r_real, 3.0, p.step_mm);
  }
}

TEST(CrossSearch, Preconditions) {
  const auto w = single_hole(0.4);
  const st::ProbeSpec p;
  EXPECT_ERROR_KIND(st::cross_search(w, {20.0, 20.0}, p, fixed_threshold(10.0)), precondition);
  EXPECT_ERROR_KIND(st::cross_search(w, {12.8, 20.0}, p, fixed_threshold(10.0)), precondition);
  st::ProbeSpec bad = p;
  bad.diameter_mm = 0.0;
  EXPECT_ERROR_KIND(st::cross_search(w, {10.0, 20.0}, bad, fixed_threshold(10.0)), parameter);
}

TEST(CrossSearch, SearchFailureNamesLeg) {
  const auto w = single_hole(0.4);
  st::ProbeSpec p;
  p.travel_budget_mm = 1.0;
  try {
    st::cross_search(w, {10.0, 20.0}, p, fixed_threshold(10.0));
    ADD_FAILURE() << "expected search failure";
  } catch (const st::Error& e) {
    EXPECT_EQ(e.kind(), st::ErrorKind::search_failure);
    EXPECT_EQ(e.position(), std::optional<std::uint64_t>(0));
    EXPECT_NE(std::string(e.what()).find("+X"), std::string::npos);
  }
  // Reaches +X and -X from a start near the right wall but not +Y.
  p.travel_budget_mm = 2.0;
  try {
    st::cross_search(w, {11.9, 20.0}, p, fixed_threshold(10.0));
    ADD_FAILURE() << "expected search failure";
  } catch (const st::Error& e) {
    EXPECT_EQ(e.kind(), st::ErrorKind::search_failure);
    EXPECT_EQ(e.position(), std::optional<std::uint64_t>(1));
  }
}

TEST(CrossSearch, NoiseFreeModelWithinSolverStep) {
  sim::HoleWorld w;
  w.holes = st::default_hole_model();
  w.quiescent_count = 20.0;
  const st::ProbeSpec p;
  st::CollisionConfig det;
  det.count_threshold = st::calibrate_contact_threshold(w, p, det, 1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ev = st::run_hole_trial(w, p, det, seed);
    for (const auto& row : ev.rows) {
      EXPECT_LE(row.pos_error, p.step_mm);
      EXPECT_LE(std::abs(row.radius_error), p.step_mm);
    }
  }
}

TEST(CrossSearch, MonteCarloMatchesTolerances) {
  sim::HoleWorld w;
  w.holes = st::default_hole_model();
  w.contact_noise_mm = 0.05;
  w.quiescent_count = 20.0;
  const st::ProbeSpec p;
  st::CollisionConfig det;
  det.count_threshold = st::calibrate_contact_threshold(w, p, det, 1);
  std::vector<double> pos, rad;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto ev = st::run_hole_trial(w, p, det, seed);
    for (const auto& row : ev.rows) {
      pos.push_back(row.pos_error);
      rad.push_back(row.radius_error);
    }
  }
  const auto s = st::summarize_hole_errors(pos, rad);
  EXPECT_LE(s.pos_rmse, 0.15);
  EXPECT_LE(s.radius_mean_abs, 0.08);
}

TEST(HoleModel, DefaultSpansRadiusRange) {
  const auto m = st::default_hole_model();
  ASSERT_EQ(m.size(), 10u);
  EXPECT_DOUBLE_EQ(m.front().radius_mm, 0.7);
  EXPECT_DOUBLE_EQ(m.back().radius_mm, 5.0);
  sim::HoleWorld w;
  w.holes = m;
  EXPECT_NO_THROW(sim::validate(w));
}

// ---------------------------------------------------------------------------

TEST(Kabsch, IdentityOnEqualSets) {
  std::mt19937_64 rng(1);
  const auto pts = random_points(rng, 10);
  const auto r = st::kabsch_align(pts, pts);
  EXPECT_NEAR(r.rotation.angle, 0.0, 1e-12);
  EXPECT_NEAR(r.translation.norm(), 0.0, 1e-12);
  EXPECT_NEAR(r.rmse, 0.0, 1e-12);
}

TEST(Kabsch, RecoversConstructedTransform) {
  std::mt19937_64 rng(2);
  const double angle = std::numbers::pi / 6.0;
  const auto est = random_points(rng, 10);
  const auto ref = transform(est, angle, {5.0, -3.0});
  const auto r = st::kabsch_align(est, ref);
  EXPECT_LE(angle_diff(r.rotation.angle, angle), 1e-9);
  EXPECT_NEAR(r.translation.x, 5.0, 1e-9);
  EXPECT_NEAR(r.translation.y, -3.0, 1e-9);
  EXPECT_LT(r.rmse, 1e-9);
}

TEST(Kabsch, RandomTransformsRecovered) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-3.1, 3.1), tr(-100.0, 100.0);
  for (int i = 0; i < 200; ++i) {
    const double a = ang(rng);
    const st::Vec2 t{tr(rng), tr(rng)};
    const auto est = random_points(rng, 3 + std::size_t(i % 20));
    const auto r = st::kabsch_align(est, transform(est, a, t));
    EXPECT_LE(angle_diff(r.rotation.angle, a), 1e-9);
    EXPECT_NEAR(st::distance(r.translation, t), 0.0, 1e-9);
    EXPECT_LT(r.rmse, 1e-9);
  }
}

TEST(Kabsch, NoisyRmseBounded) {
  std::mt19937_64 rng(4);
  const double sigma = 0.05;
  std::normal_distribution<double> n(0.0, sigma);
  for (int trial = 0; trial < 200; ++trial) {
    const auto est = random_points(rng, 10, 30.0);
    auto ref = transform(est, 0.4, {2.0, 1.0});
    for (auto& p : ref) p += st::Vec2{n(rng), n(rng)};
    EXPECT_LE(st::kabsch_align(est, ref).rmse, 2.0 * sigma);
  }
}

TEST(Kabsch, RotationIsProper) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_points(rng, 8), b = random_points(rng, 8);
    const auto m = st::kabsch_align(a, b).rotation.matrix();
    EXPECT_NEAR(m[0] * m[0] + m[2] * m[2], 1.0, 1e-12);
    EXPECT_NEAR(m[1] * m[1] + m[3] * m[3], 1.0, 1e-12);
    EXPECT_NEAR(m[0] * m[1] + m[2] * m[3], 0.0, 1e-12);
    EXPECT_NEAR(m[0] * m[3] - m[1] * m[2], 1.0, 1e-12);
  }
}

TEST(Kabsch, OptimalAgainstRandomTransforms) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ang(-3.14, 3.14), tr(-5.0, 5.0);
  std::normal_distribution<double> n(0.0, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto est = random_points(rng, 10, 20.0);
    auto ref = transform(est, 1.0, {1.0, -2.0});
    for (auto& p : ref) p += st::Vec2{n(rng), n(rng)};
    const auto best = st::kabsch_align(est, ref);
    EXPECT_LE(best.rmse, st::rigid_errors(est, ref, 0.0, {}).rmse + 1e-12);
    for (int k = 0; k < 100; ++k) {
      const auto other = st::rigid_errors(est, ref, ang(rng), {tr(rng), tr(rng)});
      EXPECT_LE(best.rmse, other.rmse + 1e-12);
    }
    const auto nudged = st::rigid_errors(est, ref, best.rotation.angle + 1e-4, best.translation);
    EXPECT_LE(best.rmse, nudged.rmse + 1e-12);
  }
}

TEST(Kabsch, AgreesWithSvdSolution) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto est = random_points(rng, 6);
    auto ref = transform(est, 0.1 * trial, {3.0, 4.0});
    for (auto& p : ref) p += st::Vec2{n(rng), n(rng)};
    EXPECT_LE(angle_diff(st::kabsch_align(est, ref).rotation.angle, svd_angle(est, ref)), 1e-9);
  }
}

TEST(Kabsch, ReflectionYieldsProperRotation) {
  std::mt19937_64 rng(8);
  const auto est = random_points(rng, 10);
  std::vector<st::Vec2> mirrored;
  for (const auto& p : est) mirrored.push_back({-p.x, p.y});
  const auto r = st::kabsch_align(est, mirrored);
  const auto m = r.rotation.matrix();
  EXPECT_NEAR(m[0] * m[3] - m[1] * m[2], 1.0, 1e-12);
  EXPECT_LE(angle_diff(r.rotation.angle, svd_angle(est, mirrored)), 1e-9);
  EXPECT_GT(r.rmse, 0.0);
}

TEST(Kabsch, DegenerateInputs) {
  EXPECT_ERROR_KIND(st::kabsch_align(std::vector<st::Vec2>{{1, 1}}, std::vector<st::Vec2>{{2, 2}}), degenerate);
  const std::vector<st::Vec2> same{{1, 1}, {1, 1}, {1, 1}};
  EXPECT_ERROR_KIND(st::kabsch_align(same, same), degenerate);
  EXPECT_ERROR_KIND(st::kabsch_align(std::vector<st::Vec2>{{0, 0}, {1, 0}}, same), input);
}

// ---------------------------------------------------------------------------

TEST(EvaluateHoles, PerfectEstimates) {
  const auto model = st::default_hole_model();
  std::vector<st::HoleEstimate> est(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    est[i].x_c = model[i].center.x;
    est[i].y_c = model[i].center.y;
    est[i].r_real = model[i].radius_mm;
  }
  const auto ev = st::evaluate_holes(est, model);
  EXPECT_NEAR(ev.summary.pos_rmse, 0.0, 1e-12);
  EXPECT_NEAR(ev.summary.radius_mean_abs, 0.0, 1e-12);
  EXPECT_NEAR(ev.summary.radius_mean_signed, 0.0, 1e-12);
}

TEST(EvaluateHoles, RigidlyMovedEstimatesAlignAway) {
  const auto model = st::default_hole_model();
  std::vector<st::Vec2> centers;
  for (const auto& h : model) centers.push_back(h.center);
  const auto moved = transform(centers, 0.3, {100.0, -40.0});
  std::vector<st::HoleEstimate> est(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    est[i].x_c = moved[i].x;
    est[i].y_c = moved[i].y;
    est[i].r_real = model[i].radius_mm + (i % 2 ? 0.02 : -0.01);
  }
  const auto ev = st::evaluate_holes(est, model);
  EXPECT_LT(ev.summary.pos_rmse, 1e-9);
  EXPECT_NEAR(ev.summary.radius_mean_abs, 0.015, 1e-12);
  EXPECT_NEAR(ev.summary.radius_mean_signed, 0.005, 1e-12);
  EXPECT_NEAR(ev.rows[1].radius_error, 0.02, 1e-12);
}

TEST(EvaluateHoles, SingleHoleComparedInPlace) {
  const std::vector<sim::Hole> model{{{1.0, 2.0}, 1.5}};
  std::vector<st::HoleEstimate> est(1);
  est[0].x_c = 1.03;
  est[0].y_c = 2.04;
  est[0].r_real = 1.4;
  const auto ev = st::evaluate_holes(est, model);
  EXPECT_NEAR(ev.summary.pos_rmse, 0.05, 1e-12);
  EXPECT_NEAR(ev.rows[0].pos_error, 0.05, 1e-12);
  EXPECT_NEAR(ev.rows[0].radius_error, -0.1, 1e-12);
}

TEST(EvaluateHoles, CountMismatch) {
  const auto model = st::default_hole_model();
  EXPECT_ERROR_KIND(st::evaluate_holes(std::vector<st::HoleEstimate>(9), model), input);
}

TEST(EvaluateHoles, ReferenceRowsArithmetic) {
  const std::vector<double> pos{0.0924, 0.0756, 0.0625, 0.0729, 0.0965,
                                0.0539, 0.1068, 0.0671, 0.1195, 0.1572};
  const std::vector<double> rad{0.0159, -0.0214, 0.0663, 0.0330, 0.0242,
                                0.0513, -0.0280, 0.1350, -0.0046, 0.1799};
  const auto s = st::summarize_hole_errors(pos, rad);
  EXPECT_NEAR(s.pos_rmse, 0.0952, 0.002);
  // The reference radius mean matches the signed average of the rows.
  EXPECT_NEAR(s.radius_mean_signed, 0.0452, 0.0005);
  EXPECT_GT(std::abs(s.radius_mean_abs - 0.0452), 0.005);
}
