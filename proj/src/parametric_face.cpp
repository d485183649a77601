#include "lcvd/parametric_face.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <utility>

#include <Eigen/Geometry>

#include "lcvd/error.hpp"
#include "lcvd/rng.hpp"
#include "lcvd/sh_shading.hpp"

namespace lcvd {

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw Error(std::string("face model: ") + what + " contains NaN/Inf");
}

int subdivisions_for(std::size_t vertex_count) {
  std::size_t n = 12;
  for (int level = 0; level < 12; ++level) {
    if (n == vertex_count) return level;
    if (n > vertex_count) break;
    n = 10 * ((n - 2) / 10) * 4 + 2;
  }
  return -1;
}

}  // namespace

ParametricFaceModel::ParametricFaceModel(std::vector<Vec3> template_vertices,
                                         std::vector<Triangle> faces, Eigen::MatrixXd shape_basis,
                                         Eigen::MatrixXd expr_basis)
    : template_(std::move(template_vertices)),
      faces_(std::move(faces)),
      shape_basis_(std::move(shape_basis)),
      expr_basis_(std::move(expr_basis)) {
  const auto rows = static_cast<Eigen::Index>(3 * template_.size());
  for (const Triangle& f : faces_)
    for (std::uint32_t idx : f)
      if (idx >= template_.size()) {
        throw Error("face model: face index " + std::to_string(idx) + " out of range (m = " +
                    std::to_string(template_.size()) + ")");
      }
  if (shape_basis_.rows() != rows || expr_basis_.rows() != rows) {
    throw ShapeError("face model: basis leading dimension must equal 3m = " + std::to_string(rows));
  }
  if (shape_basis_.cols() < 1 || expr_basis_.cols() < 1) {
    throw Error("face model: basis dims must be positive");
  }
  for (const Vec3& v : template_)
    if (!v.allFinite()) throw Error("face model: template contains NaN/Inf");
  check_finite(shape_basis_, "shape basis");
  check_finite(expr_basis_, "expression basis");
}

bool operator==(const ParametricFaceModel& a, const ParametricFaceModel& b) {
  return a.template_ == b.template_ && a.faces_ == b.faces_ &&
         a.shape_basis_.rows() == b.shape_basis_.rows() &&
         a.shape_basis_.cols() == b.shape_basis_.cols() && a.shape_basis_ == b.shape_basis_ &&
         a.expr_basis_.rows() == b.expr_basis_.rows() &&
         a.expr_basis_.cols() == b.expr_basis_.cols() && a.expr_basis_ == b.expr_basis_;
}

IcoSphere make_icosphere(int subdivisions) {
  if (subdivisions < 0) throw Error("make_icosphere: negative subdivision level");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  IcoSphere s;
  s.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& v : s.vertices) v.normalize();
  s.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      const auto idx = static_cast<std::uint32_t>(s.vertices.size());
      s.vertices.push_back((s.vertices[a] + s.vertices[b]).normalized());
      midpoints.emplace(key, idx);
      return idx;
    };
    std::vector<Triangle> next;
    next.reserve(s.faces.size() * 4);
    for (const Triangle& f : s.faces) {
      const std::uint32_t ab = midpoint(f[0], f[1]);
      const std::uint32_t bc = midpoint(f[1], f[2]);
      const std::uint32_t ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    s.faces = std::move(next);
  }

  // Enforce outward winding.
  for (Triangle& f : s.faces) {
    const Vec3& a = s.vertices[f[0]];
    const Vec3 n = (s.vertices[f[1]] - a).cross(s.vertices[f[2]] - a);
    if (n.dot(a + s.vertices[f[1]] + s.vertices[f[2]]) < 0.0) std::swap(f[1], f[2]);
  }
  return s;
}

ParametricFaceModel build_model(const FaceModelConfig& config) {
  if (config.vertices < 12) {
    throw Error("build_model: vertex count must be >= 12 (got " + std::to_string(config.vertices) +
                ")");
  }
  if (config.shape_dims < 1 || config.expr_dims < 1) {
    throw Error("build_model: shape and expression dims must be positive");
  }
  const int level = subdivisions_for(config.vertices);
  if (level < 0) {
    throw Error("build_model: vertex count " + std::to_string(config.vertices) +
                " is not an icosphere size (10*4^k + 2)");
  }
  IcoSphere sphere = make_icosphere(level);
  const std::size_t m = sphere.vertices.size();

  // Smooth per-vertex fields from the SH basis of the vertex direction, one
  // random 9-weight combination per (basis column, axis).
  std::vector<ShBasis> directional(m);
  for (std::size_t i = 0; i < m; ++i) directional[i] = sh_basis(sphere.vertices[i]);

  Rng rng(config.seed);
  auto make_basis = [&](std::size_t dims) {
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(3 * m), static_cast<Eigen::Index>(dims));
    for (std::size_t k = 0; k < dims; ++k) {
      std::array<ShBasis, 3> weights;
      for (auto& axis : weights)
        for (double& w : axis) w = rng.uniform(-1.0, 1.0);
      double peak = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t a = 0; a < 3; ++a) {
          double v = 0.0;
          for (std::size_t b = 0; b < kShCount; ++b) v += weights[a][b] * directional[i][b];
          basis(static_cast<Eigen::Index>(3 * i + a), static_cast<Eigen::Index>(k)) = v;
          peak = std::max(peak, std::abs(v));
        }
      const double amplitude = 0.1 * rng.uniform(0.5, 1.0);
      if (peak > 0.0) basis.col(static_cast<Eigen::Index>(k)) *= amplitude / peak;
    }
    return basis;
  };
  Eigen::MatrixXd shape = make_basis(config.shape_dims);
  Eigen::MatrixXd expr = make_basis(config.expr_dims);
  return ParametricFaceModel(std::move(sphere.vertices), std::move(sphere.faces), std::move(shape),
                             std::move(expr));
}

Eigen::Matrix3d rotation_matrix(const Vec3& axis_angle) {
  if (!axis_angle.allFinite()) throw Error("rotation_matrix: non-finite rotation");
  const double angle = axis_angle.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

std::vector<Vec3> neutral_vertices(const ParametricFaceModel& model, const Eigen::VectorXd& shape,
                                   const Eigen::VectorXd& expression) {
  if (static_cast<std::size_t>(shape.size()) != model.shape_dims()) {
    throw ShapeError("forward: shape vector has " + std::to_string(shape.size()) +
                     " entries, model expects " + std::to_string(model.shape_dims()));
  }
  if (static_cast<std::size_t>(expression.size()) != model.expr_dims()) {
    throw ShapeError("forward: expression vector has " + std::to_string(expression.size()) +
                     " entries, model expects " + std::to_string(model.expr_dims()));
  }
  const Eigen::VectorXd offset = model.shape_basis() * shape + model.expr_basis() * expression;
  std::vector<Vec3> out(model.template_vertices());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += offset.segment<3>(static_cast<Eigen::Index>(3 * i));
  }
  return out;
}

Mesh forward(const ParametricFaceModel& model, const Eigen::VectorXd& shape, const PoseParams& pose,
             const Eigen::VectorXd& expression) {
  if (!pose.translation.allFinite()) throw Error("forward: non-finite translation");
  const Eigen::Matrix3d r = rotation_matrix(pose.rotation);
  const bool identity = pose.rotation.isZero(0.0);

  Mesh mesh;
  mesh.vertices = neutral_vertices(model, shape, expression);
  for (Vec3& v : mesh.vertices) {
    if (!identity) v = r * v;
    v += pose.translation;
  }
  mesh.faces = model.faces();
  mesh.normals = vertex_normals(mesh.vertices, mesh.faces).normals;
  return mesh;
}

VertexNormals vertex_normals(std::span<const Vec3> vertices, std::span<const Triangle> faces) {
  std::vector<Vec3> accum(vertices.size(), Vec3::Zero());
  std::vector<bool> touched(vertices.size(), false);
  for (const Triangle& f : faces) {
    for (std::uint32_t idx : f)
      if (idx >= vertices.size()) throw Error("vertex_normals: face index out of range");
    const Vec3& a = vertices[f[0]];
    const Vec3 e1 = vertices[f[1]] - a;
    const Vec3 e2 = vertices[f[2]] - a;
    const Vec3 n = e1.cross(e2);  // length = 2 * area
    const double scale = std::max({e1.squaredNorm(), e2.squaredNorm(), (e2 - e1).squaredNorm()});
    if (!(n.norm() > 1e-12 * scale)) continue;
    for (std::uint32_t idx : f) {
      accum[idx] += n;
      touched[idx] = true;
    }
  }

  VertexNormals out;
  out.normals.resize(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const double len = accum[i].norm();
    if (!touched[i] || !(len > 0.0)) {
      out.normals[i] = Vec3::UnitZ();
      out.flagged.push_back(i);
    } else {
      out.normals[i] = accum[i] / len;
    }
  }
  return out;
}

void write_obj(const Mesh& mesh, std::ostream& out) {
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const Triangle& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  j["data"] = std::move(data);
  return j;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* what) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw ConfigError(what, "data length does not match rows*cols");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

}  // namespace

nlohmann::json model_to_json(const ParametricFaceModel& model) {
  nlohmann::json j;
  j["version"] = kModelFormatVersion;
  nlohmann::json verts = nlohmann::json::array();
  for (const Vec3& v : model.template_vertices()) verts.push_back({v.x(), v.y(), v.z()});
  j["template"] = std::move(verts);
  j["faces"] = model.faces();
  j["shape_basis"] = matrix_to_json(model.shape_basis());
  j["expr_basis"] = matrix_to_json(model.expr_basis());
  return j;
}

ParametricFaceModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kModelFormatVersion) {
      throw ConfigError("version", "unsupported model format version");
    }
    std::vector<Vec3> verts;
    for (const auto& v : j.at("template")) {
      verts.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
    }
    auto faces = j.at("faces").get<std::vector<Triangle>>();
    return ParametricFaceModel(std::move(verts), std::move(faces),
                               matrix_from_json(j.at("shape_basis"), "shape_basis"),
                               matrix_from_json(j.at("expr_basis"), "expr_basis"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model", e.what());
  }
}

nlohmann::json pose_to_json(const PoseParams& pose) {
  return {{"rotation", {pose.rotation.x(), pose.rotation.y(), pose.rotation.z()}},
          {"translation", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

PoseParams pose_from_json(const nlohmann::json& j) {
  auto vec3 = [&](const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw ConfigError(key, "expected 3 numbers");
    Vec3 v(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
    if (!v.allFinite()) throw ConfigError(key, "values must be finite");
    return v;
  };
  PoseParams p;
  p.rotation = vec3("rotation");
  p.translation = vec3("translation");
  return p;
}

}  // namespace lcvd
