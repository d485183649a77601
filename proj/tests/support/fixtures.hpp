#pragma once

// Scene inputs for pipeline and CLI tests, written to a scratch directory.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "lcvd/motion_alignment.hpp"
#include "lcvd/pipeline.hpp"

namespace lcvd::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("lcvd_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream(p) << j.dump(2) << "\n";
}

inline SHCoefficients demo_light(double angle) {
  SHCoefficients l = SHCoefficients::dc(1.8, 1.7, 1.6);
  for (auto& ch : l.coeffs) {
    ch[2] = 0.4 * std::cos(angle);
    ch[3] = 0.4 * std::sin(angle);
    ch[1] = 0.1;
  }
  return l;
}

inline DrivingSequence demo_driving(std::size_t frames, std::size_t expr_dims) {
  DrivingSequence d;
  for (std::size_t i = 0; i < frames; ++i) {
    const double t = static_cast<double>(i) / 6.0;
    PoseParams p;
    p.rotation = Vec3(0.05 * std::sin(t), 0.3 * std::sin(t), 0.0);
    p.translation = Vec3(0.02 * std::cos(t), 0.0, 0.0);
    d.poses.push_back(p);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(expr_dims));
    for (Eigen::Index k = 0; k < e.size(); ++k) e[k] = 0.5 * std::sin(t + 0.3 * static_cast<double>(k));
    d.expressions.push_back(e);
  }
  return d;
}

struct DemoPaths {
  std::filesystem::path dir, driving, reference, lighting;
};

// Writes driving, reference and lighting JSON for the built-in face model.
inline DemoPaths write_demo_scene(const std::filesystem::path& dir, std::size_t frames,
                                  double light_angle = 0.7) {
  const FaceModelConfig defaults;
  DemoPaths p{dir, dir / "driving.json", dir / "reference.json", dir / "lighting.json"};
  write_json(p.driving, driving_to_json(demo_driving(frames, defaults.expr_dims)));
  ReferenceSpec ref;
  ref.shape = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(defaults.shape_dims), 0.2);
  ref.lighting = demo_light(0.0);
  ref.albedo = Vec3(0.9, 0.7, 0.6);
  ref.background = Vec3(0.1, 0.15, 0.2);
  write_json(p.reference, reference_to_json(ref));
  write_json(p.lighting, sh_to_json(demo_light(light_angle)));
  return p;
}

inline nlohmann::json demo_config(const DemoPaths& p, const std::string& mode,
                                  const std::filesystem::path& out) {
  return {{"mode", mode},
          {"driving", p.driving.string()},
          {"reference", p.reference.string()},
          {"lighting", p.lighting.string()},
          {"output_dir", out.string()},
          {"resolution", 64},
          {"seed", 7}};
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace lcvd::testing
