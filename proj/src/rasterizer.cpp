#include "lcvd/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Geometry>

#include "lcvd/error.hpp"

namespace lcvd {

namespace {

constexpr std::int64_t kSubpixel = 256;
constexpr double kMaxPixelCoord = 1 << 20;

struct FixedPoint {
  std::int64_t x;
  std::int64_t y;
};

std::int64_t edge(const FixedPoint& a, const FixedPoint& b, std::int64_t px, std::int64_t py) {
  return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

bool is_top_left(const FixedPoint& a, const FixedPoint& b) {
  const std::int64_t dx = b.x - a.x;
  const std::int64_t dy = b.y - a.y;
  return (dy == 0 && dx > 0) || dy < 0;
}

bool covers(std::int64_t w, bool top_left) { return w > 0 || (w == 0 && top_left); }

ShadingFrame rasterize(const Mesh& mesh, const Camera& camera, const SHCoefficients& l,
                       Resolution res, std::span<const Vec3> albedo) {
  if (res.height < 16 || res.width < 16) {
    throw Error("render_shading_hints: resolution must be at least 16x16");
  }
  if (!(camera.scale > 0.0) || !camera.center.allFinite()) {
    throw Error("render_shading_hints: camera scale must be positive and center finite");
  }
  if (mesh.normals.size() != mesh.vertices.size()) {
    throw ShapeError("render_shading_hints: mesh normals must match vertex count");
  }
  if (!albedo.empty() && albedo.size() != mesh.vertices.size()) {
    throw ShapeError("render_albedo_shaded: albedo must match vertex count");
  }

  ShadingFrame frame(res.height, res.width);
  const std::int64_t cx = std::llround(camera.center.x() * kSubpixel);
  const std::int64_t cy = std::llround(camera.center.y() * kSubpixel);

  std::vector<FixedPoint> snapped(mesh.vertices.size());
  std::vector<double> depth(mesh.vertices.size());
  std::vector<bool> usable(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    const double sx = camera.scale * v.x();
    const double sy = camera.scale * v.y();
    usable[i] = v.allFinite() && std::abs(sx) < kMaxPixelCoord && std::abs(sy) < kMaxPixelCoord &&
                std::abs(camera.center.x()) < kMaxPixelCoord &&
                std::abs(camera.center.y()) < kMaxPixelCoord;
    if (!usable[i]) continue;
    snapped[i] = {std::llround(sx * kSubpixel) + cx, std::llround(sy * kSubpixel) + cy};
    depth[i] = -v.z();
  }

  const auto width = static_cast<std::int64_t>(res.width);
  const auto height = static_cast<std::int64_t>(res.height);

  for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const Triangle& f = mesh.faces[fi];
    if (f[0] >= snapped.size() || f[1] >= snapped.size() || f[2] >= snapped.size()) {
      throw Error("render_shading_hints: face index out of range");
    }
    if (!usable[f[0]] || !usable[f[1]] || !usable[f[2]]) continue;
    const FixedPoint& a = snapped[f[0]];
    const FixedPoint& b = snapped[f[1]];
    const FixedPoint& c = snapped[f[2]];
    const std::int64_t area = edge(a, b, c.x, c.y);
    if (area <= 0) continue;  // back-facing or degenerate

    const std::int64_t min_x = std::min({a.x, b.x, c.x});
    const std::int64_t max_x = std::max({a.x, b.x, c.x});
    const std::int64_t min_y = std::min({a.y, b.y, c.y});
    const std::int64_t max_y = std::max({a.y, b.y, c.y});
    // Pixel column x has its center at x * 256 + 128.
    auto first_pixel = [](std::int64_t lo) {
      const std::int64_t n = lo - kSubpixel / 2;
      return n >= 0 ? (n + kSubpixel - 1) / kSubpixel : -((-n) / kSubpixel);
    };
    auto last_pixel = [](std::int64_t hi) {
      const std::int64_t n = hi - kSubpixel / 2;
      return n >= 0 ? n / kSubpixel : -((-n + kSubpixel - 1) / kSubpixel);
    };
    const std::int64_t x0 = std::max<std::int64_t>(0, first_pixel(min_x));
    const std::int64_t x1 = std::min<std::int64_t>(width - 1, last_pixel(max_x));
    const std::int64_t y0 = std::max<std::int64_t>(0, first_pixel(min_y));
    const std::int64_t y1 = std::min<std::int64_t>(height - 1, last_pixel(max_y));
    if (x0 > x1 || y0 > y1) continue;

    const bool tl0 = is_top_left(b, c);
    const bool tl1 = is_top_left(c, a);
    const bool tl2 = is_top_left(a, b);
    const double inv_area = 1.0 / static_cast<double>(area);
    const Vec3& n0 = mesh.normals[f[0]];
    const Vec3& n1 = mesh.normals[f[1]];
    const Vec3& n2 = mesh.normals[f[2]];
    const Vec3 face_normal =
        (mesh.vertices[f[1]] - mesh.vertices[f[0]]).cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
    const auto tri = static_cast<std::int32_t>(fi);

    for (std::int64_t y = y0; y <= y1; ++y) {
      const std::int64_t py = y * kSubpixel + kSubpixel / 2;
      for (std::int64_t x = x0; x <= x1; ++x) {
        const std::int64_t px = x * kSubpixel + kSubpixel / 2;
        const std::int64_t w0 = edge(b, c, px, py);
        const std::int64_t w1 = edge(c, a, px, py);
        const std::int64_t w2 = edge(a, b, px, py);
        if (!covers(w0, tl0) || !covers(w1, tl1) || !covers(w2, tl2)) continue;

        const double b0 = static_cast<double>(w0) * inv_area;
        const double b1 = static_cast<double>(w1) * inv_area;
        const double b2 = static_cast<double>(w2) * inv_area;
        const double z = b0 * depth[f[0]] + b1 * depth[f[1]] + b2 * depth[f[2]];
        const std::size_t idx = frame.index(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        const double current = frame.depth[idx];
        if (!(z < current || (z == current && tri < frame.triangle[idx]))) continue;

        Vec3 n = b0 * n0 + b1 * n1 + b2 * n2;
        double len = n.norm();
        if (!(len > 1e-12)) {
          n = face_normal;
          len = n.norm();
        }
        n /= len;
        Vec3 rgb = shade(n, l);
        if (!albedo.empty()) {
          const Vec3 alb = b0 * albedo[f[0]] + b1 * albedo[f[1]] + b2 * albedo[f[2]];
          rgb = rgb.cwiseProduct(alb).cwiseMax(0.0).cwiseMin(1.0);
        }
        frame.depth[idx] = z;
        frame.triangle[idx] = tri;
        frame.mask[idx] = 1;
        for (int k = 0; k < 3; ++k) {
          frame.image[3 * idx + static_cast<std::size_t>(k)] = rgb[k];
          frame.normals[3 * idx + static_cast<std::size_t>(k)] = n[k];
        }
      }
    }
  }
  return frame;
}

}  // namespace

Camera default_camera(Resolution res) {
  Camera cam;
  cam.scale = 0.4 * static_cast<double>(std::min(res.height, res.width));
  cam.center = {static_cast<double>(res.width) / 2.0, static_cast<double>(res.height) / 2.0};
  return cam;
}

Projection project(const Camera& camera, const Vec3& v) {
  return {camera.scale * Eigen::Vector2d(v.x(), v.y()) + camera.center, -v.z()};
}

ShadingFrame::ShadingFrame(std::size_t h, std::size_t w)
    : height(h),
      width(w),
      image(h * w * 3, 0.0),
      mask(h * w, 0),
      depth(h * w, std::numeric_limits<double>::infinity()),
      normals(h * w * 3, 0.0),
      triangle(h * w, -1) {}

Eigen::Vector3d ShadingFrame::color(std::size_t y, std::size_t x) const {
  const std::size_t i = 3 * index(y, x);
  return {image[i], image[i + 1], image[i + 2]};
}

Eigen::Vector3d ShadingFrame::normal(std::size_t y, std::size_t x) const {
  const std::size_t i = 3 * index(y, x);
  return {normals[i], normals[i + 1], normals[i + 2]};
}

ShadingFrame render_shading_hints(const Mesh& mesh, const Camera& camera, const SHCoefficients& l,
                                  Resolution res) {
  return rasterize(mesh, camera, l, res, {});
}

ShadingFrame render_albedo_shaded(const Mesh& mesh, const Camera& camera, const SHCoefficients& l,
                                  Resolution res, std::span<const Vec3> albedo) {
  if (albedo.empty() && !mesh.vertices.empty()) {
    throw ShapeError("render_albedo_shaded: albedo must match vertex count");
  }
  return rasterize(mesh, camera, l, res, albedo);
}

}  // namespace lcvd
