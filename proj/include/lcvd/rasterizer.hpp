#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lcvd/parametric_face.hpp"
#include "lcvd/sh_shading.hpp"

namespace lcvd {

// Weak-perspective camera: pixel = scale * (x, y) + center; depth = -z.
struct Camera {
  double scale = 1.0;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
};

struct Resolution {
  std::size_t height = 512;
  std::size_t width = 512;
};

// Camera that frames the unit sphere with a small margin.
Camera default_camera(Resolution res);

struct Projection {
  Eigen::Vector2d pixel;
  double depth;
};

Projection project(const Camera& camera, const Vec3& v);

struct ShadingFrame {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> image;         // H x W x 3, in [0, 1]
  std::vector<std::uint8_t> mask;    // H x W, 1 = portrait
  std::vector<double> depth;         // H x W, +inf where nothing was drawn
  std::vector<double> normals;       // H x W x 3 interpolated unit normals, 0 outside
  std::vector<std::int32_t> triangle;  // H x W winning face index, -1 outside

  ShadingFrame() = default;
  ShadingFrame(std::size_t h, std::size_t w);

  std::size_t index(std::size_t y, std::size_t x) const { return y * width + x; }
  Eigen::Vector3d color(std::size_t y, std::size_t x) const;
  Eigen::Vector3d normal(std::size_t y, std::size_t x) const;
};

// Z-buffered rasterization of the front faces of `mesh`, each pixel shaded
// with SH irradiance at the barycentric-interpolated vertex normal.
//
// Vertices are snapped to a 1/256 pixel grid and edge functions evaluated in
// integer arithmetic; pixel centers sit at (x + 0.5, y + 0.5) and shared edges
// follow the top-left fill rule. Depth ties resolve to the lower face index.
ShadingFrame render_shading_hints(const Mesh& mesh, const Camera& camera, const SHCoefficients& l,
                                  Resolution res);

// As above, with the shading multiplied per channel by an interpolated
// per-vertex albedo. Used to synthesize ground-truth frames.
ShadingFrame render_albedo_shaded(const Mesh& mesh, const Camera& camera, const SHCoefficients& l,
                                  Resolution res, std::span<const Vec3> albedo);

}  // namespace lcvd
