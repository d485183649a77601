#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace lcvd {

using Vec3 = Eigen::Vector3d;
using Triangle = std::array<std::uint32_t, 3>;

// Rigid head pose: axis-angle rotation (radians) followed by a translation.
struct PoseParams {
  Vec3 rotation = Vec3::Zero();
  Vec3 translation = Vec3::Zero();

  friend bool operator==(const PoseParams& a, const PoseParams& b) {
    return a.rotation == b.rotation && a.translation == b.translation;
  }
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> faces;
  std::vector<Vec3> normals;
};

struct FaceModelConfig {
  std::size_t vertices = 642;
  std::size_t shape_dims = 100;
  std::size_t expr_dims = 50;
  std::uint64_t seed = 0;
};

// Linear blendshape face model. Bases are stored as (3m x dims) matrices with
// rows ordered x0, y0, z0, x1, ... so a coefficient vector maps directly to a
// stacked vertex offset.
class ParametricFaceModel {
 public:
  ParametricFaceModel(std::vector<Vec3> template_vertices, std::vector<Triangle> faces,
                      Eigen::MatrixXd shape_basis, Eigen::MatrixXd expr_basis);

  std::size_t vertex_count() const { return template_.size(); }
  std::size_t shape_dims() const { return static_cast<std::size_t>(shape_basis_.cols()); }
  std::size_t expr_dims() const { return static_cast<std::size_t>(expr_basis_.cols()); }

  const std::vector<Vec3>& template_vertices() const { return template_; }
  const std::vector<Triangle>& faces() const { return faces_; }
  const Eigen::MatrixXd& shape_basis() const { return shape_basis_; }
  const Eigen::MatrixXd& expr_basis() const { return expr_basis_; }

  friend bool operator==(const ParametricFaceModel& a, const ParametricFaceModel& b);

 private:
  std::vector<Vec3> template_;
  std::vector<Triangle> faces_;
  Eigen::MatrixXd shape_basis_;
  Eigen::MatrixXd expr_basis_;
};

struct IcoSphere {
  std::vector<Vec3> vertices;
  std::vector<Triangle> faces;
};

// Unit icosphere with outward (counter-clockwise seen from outside) winding.
// Vertex count is 10 * 4^subdivisions + 2.
IcoSphere make_icosphere(int subdivisions);

// Synthesizes a deterministic toy model: unit icosphere template plus smooth
// random bases bounded in [-0.1, 0.1]. `vertices` must be an icosphere vertex
// count (12, 42, 162, 642, 2562, ...).
ParametricFaceModel build_model(const FaceModelConfig& config);

Eigen::Matrix3d rotation_matrix(const Vec3& axis_angle);

// template + shape_basis * s + expr_basis * e, before the rigid pose.
std::vector<Vec3> neutral_vertices(const ParametricFaceModel& model, const Eigen::VectorXd& shape,
                                   const Eigen::VectorXd& expression);

Mesh forward(const ParametricFaceModel& model, const Eigen::VectorXd& shape, const PoseParams& pose,
             const Eigen::VectorXd& expression);

struct VertexNormals {
  std::vector<Vec3> normals;
  // Vertices whose incident faces are all degenerate (or that have none).
  // Their normal is set to +z.
  std::vector<std::size_t> flagged;
};

// Area-weighted accumulation of face normals, then normalization.
VertexNormals vertex_normals(std::span<const Vec3> vertices, std::span<const Triangle> faces);

void write_obj(const Mesh& mesh, std::ostream& out);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const ParametricFaceModel& model);
ParametricFaceModel model_from_json(const nlohmann::json& j);

nlohmann::json pose_to_json(const PoseParams& pose);
PoseParams pose_from_json(const nlohmann::json& j);

}  // namespace lcvd
