#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "lcvd/error.hpp"
#include "lcvd/parametric_face.hpp"
#include "lcvd/rng.hpp"

using namespace lcvd;

namespace {

FaceModelConfig small(std::uint64_t seed = 7) { return {42, 4, 2, seed}; }

Eigen::VectorXd random_vec(std::size_t n, Rng& rng) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

}  // namespace

TEST(Icosphere, VertexAndFaceCounts) {
  for (int k = 0; k <= 3; ++k) {
    const IcoSphere s = make_icosphere(k);
    const std::size_t m = 10 * (std::size_t{1} << (2 * k)) + 2;
    EXPECT_EQ(s.vertices.size(), m);
    EXPECT_EQ(s.faces.size(), 2 * m - 4);
  }
}

TEST(BuildModel, DeterministicPerSeed) {
  EXPECT_TRUE(build_model(small()) == build_model(small()));
  EXPECT_FALSE(build_model(small(7)) == build_model(small(8)));
}

TEST(BuildModel, TemplateOnUnitSphere) {
  const auto model = build_model(small());
  for (const Vec3& v : model.template_vertices()) EXPECT_NEAR(v.norm(), 1.0, 1e-6);
}

TEST(BuildModel, RejectsBadVertexCounts) {
  EXPECT_THROW(build_model({11, 4, 2, 7}), Error);
  EXPECT_THROW(build_model({43, 4, 2, 7}), Error);
  EXPECT_THROW(build_model({42, 0, 2, 7}), Error);
}

TEST(BuildModel, BasesBounded) {
  const auto model = build_model({162, 10, 5, 3});
  EXPECT_LE(model.shape_basis().cwiseAbs().maxCoeff(), 0.1 + 1e-12);
  EXPECT_LE(model.expr_basis().cwiseAbs().maxCoeff(), 0.1 + 1e-12);
}

TEST(Forward, ZeroParametersGiveTemplate) {
  const auto model = build_model(small());
  const Mesh mesh = forward(model, Eigen::VectorXd::Zero(4), PoseParams{}, Eigen::VectorXd::Zero(2));
  ASSERT_EQ(mesh.vertices.size(), model.vertex_count());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    EXPECT_EQ(mesh.vertices[i], model.template_vertices()[i]);
  }
}

TEST(Forward, HalfTurnAboutZ) {
  const auto model = build_model(small());
  PoseParams pose;
  pose.rotation = Vec3(0, 0, std::numbers::pi);
  const Mesh mesh = forward(model, Eigen::VectorXd::Zero(4), pose, Eigen::VectorXd::Zero(2));
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& t = model.template_vertices()[i];
    EXPECT_NEAR(mesh.vertices[i].x(), -t.x(), 1e-9);
    EXPECT_NEAR(mesh.vertices[i].y(), -t.y(), 1e-9);
    EXPECT_NEAR(mesh.vertices[i].z(), t.z(), 1e-9);
  }
}

TEST(Forward, UnitShapeCoefficientMatchesLoopSum) {
  const auto model = build_model(small());
  for (Eigen::Index k = 0; k < 4; ++k) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(4);
    s[k] = 1.0;
    const Mesh mesh = forward(model, s, PoseParams{}, Eigen::VectorXd::Zero(2));
    for (std::size_t i = 0; i < model.vertex_count(); ++i)
      for (int a = 0; a < 3; ++a) {
        const double expect = model.template_vertices()[i][a] +
                              model.shape_basis()(static_cast<Eigen::Index>(3 * i + a), k);
        EXPECT_NEAR(mesh.vertices[i][a], expect, 1e-12);
      }
  }
}

TEST(Forward, LinearInShapeAndExpression) {
  const auto model = build_model(small());
  Rng rng(3);
  const Eigen::VectorXd s1 = random_vec(4, rng), s2 = random_vec(4, rng);
  const Eigen::VectorXd e1 = random_vec(2, rng), e2 = random_vec(2, rng);
  const auto t = model.template_vertices();
  const auto a = neutral_vertices(model, s1, e1);
  const auto b = neutral_vertices(model, s2, e2);
  const auto ab = neutral_vertices(model, s1 + s2, e1 + e2);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_LE(((ab[i] - t[i]) - (a[i] - t[i]) - (b[i] - t[i])).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Forward, RotationPreservesDistancesAndTopology) {
  const auto model = build_model(small());
  Rng rng(5);
  const Eigen::VectorXd s = random_vec(4, rng), e = random_vec(2, rng);
  PoseParams pose;
  pose.rotation = Vec3(0.3, -1.1, 0.7);
  pose.translation = Vec3(0.2, 0.1, -0.4);
  const auto rest = neutral_vertices(model, s, e);
  const Mesh mesh = forward(model, s, pose, e);
  EXPECT_EQ(mesh.faces, model.faces());
  for (std::size_t i = 0; i < rest.size(); i += 3)
    for (std::size_t j = i + 1; j < rest.size(); j += 5) {
      EXPECT_NEAR((mesh.vertices[i] - mesh.vertices[j]).norm(), (rest[i] - rest[j]).norm(), 1e-9);
    }
}

TEST(Forward, RejectsWrongDimensions) {
  const auto model = build_model(small());
  EXPECT_THROW(forward(model, Eigen::VectorXd::Zero(3), PoseParams{}, Eigen::VectorXd::Zero(2)), Error);
  EXPECT_THROW(forward(model, Eigen::VectorXd::Zero(4), PoseParams{}, Eigen::VectorXd::Zero(5)), Error);
}

TEST(VertexNormals, PlanarSquare) {
  const std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  const std::vector<Triangle> f = {{0, 1, 2}, {0, 2, 3}};
  const auto n = vertex_normals(v, f);
  EXPECT_TRUE(n.flagged.empty());
  for (const Vec3& x : n.normals) EXPECT_LE((x - Vec3(0, 0, 1)).norm(), 1e-15);
}

namespace {

double max_normal_angle(int level) {
  const IcoSphere s = make_icosphere(level);
  const auto n = vertex_normals(s.vertices, s.faces);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.vertices.size(); ++i) {
    const double c = std::clamp(n.normals[i].dot(s.vertices[i].normalized()), -1.0, 1.0);
    worst = std::max(worst, std::acos(c));
  }
  return worst;
}

}  // namespace

// Area weighting is first-order accurate on the uneven subdivided triangles:
// the worst angle halves per level and drops below 1e-2 from 2562 vertices.
TEST(VertexNormals, SphereNormalsFollowDirection) {
  EXPECT_LT(max_normal_angle(0), 1e-2);
  EXPECT_LT(max_normal_angle(1), 1e-2);
  EXPECT_LT(max_normal_angle(4), 1e-2);
}

TEST(VertexNormals, SphereNormalErrorHalvesPerLevel) {
  for (int level = 2; level < 5; ++level) {
    const double ratio = max_normal_angle(level + 1) / max_normal_angle(level);
    EXPECT_NEAR(ratio, 0.5, 0.02) << "level " << level;
  }
}

TEST(VertexNormals, UnitLength) {
  const auto model = build_model({162, 4, 2, 1});
  Eigen::VectorXd s = Eigen::VectorXd::Constant(4, 0.7);
  const Mesh m = forward(model, s, PoseParams{}, Eigen::VectorXd::Constant(2, -0.5));
  for (const Vec3& n : m.normals) EXPECT_NEAR(n.norm(), 1.0, 1e-6);
}

TEST(VertexNormals, ZeroAreaFaceIgnored) {
  const IcoSphere s = make_icosphere(1);
  auto faces = s.faces;
  faces.push_back({0, 0, 5});
  faces.push_back({1, 2, 1});
  const auto a = vertex_normals(s.vertices, s.faces);
  const auto b = vertex_normals(s.vertices, faces);
  EXPECT_EQ(a.normals, b.normals);
}

TEST(VertexNormals, IsolatedVertexFlagged) {
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 5}};
  const auto n = vertex_normals(v, std::vector<Triangle>{{0, 1, 2}});
  ASSERT_EQ(n.flagged.size(), 1u);
  EXPECT_EQ(n.flagged[0], 3u);
  EXPECT_EQ(n.normals[3], Vec3(0, 0, 1));
}

TEST(ModelJson, RoundTrip) {
  const auto model = build_model(small());
  EXPECT_TRUE(model_from_json(model_to_json(model)) == model);
  auto j = model_to_json(model);
  j["version"] = 99;
  EXPECT_THROW(model_from_json(j), Error);
}

TEST(PoseJson, RoundTrip) {
  PoseParams p;
  p.rotation = Vec3(0.1, 0.2, 0.3);
  p.translation = Vec3(-1, 2, 0.5);
  EXPECT_EQ(pose_from_json(pose_to_json(p)), p);
}

TEST(WriteObj, OneBasedFaces) {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  std::ostringstream out;
  write_obj(m, out);
  const std::string text = out.str();
  EXPECT_NE(text.find("f 1 2 3\n"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), 'v'), 3);
}
