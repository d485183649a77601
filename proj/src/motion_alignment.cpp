#include "lcvd/motion_alignment.hpp"

#include <string>

#include "lcvd/error.hpp"

namespace lcvd {

namespace {

void validate(const DrivingSequence& driving, const Eigen::VectorXd& ref_shape) {
  if (driving.poses.empty()) throw Error("motion alignment: driving sequence is empty");
  if (driving.poses.size() != driving.expressions.size()) {
    throw ShapeError("motion alignment: " + std::to_string(driving.poses.size()) + " poses but " +
                     std::to_string(driving.expressions.size()) + " expressions");
  }
  const auto dims = driving.expressions.front().size();
  for (std::size_t i = 0; i < driving.size(); ++i) {
    if (driving.expressions[i].size() != dims) {
      throw ShapeError("motion alignment: expression length differs at frame " + std::to_string(i));
    }
    if (!driving.poses[i].rotation.allFinite() || !driving.poses[i].translation.allFinite() ||
        !driving.expressions[i].allFinite()) {
      throw Error("motion alignment: non-finite parameters at frame " + std::to_string(i));
    }
  }
  if (!ref_shape.allFinite()) throw Error("motion alignment: non-finite reference shape");
}

}  // namespace

AlignedSequence align_relative(const DrivingSequence& driving, const PoseParams& ref_pose,
                               const Eigen::VectorXd& ref_shape, const SHCoefficients& target_light) {
  validate(driving, ref_shape);
  AlignedSequence out;
  out.poses.reserve(driving.size());
  const PoseParams& first = driving.poses.front();
  out.poses.push_back(ref_pose);
  for (std::size_t i = 1; i < driving.size(); ++i) {
    PoseParams p;
    p.rotation = ref_pose.rotation + (driving.poses[i].rotation - first.rotation);
    p.translation = ref_pose.translation + (driving.poses[i].translation - first.translation);
    out.poses.push_back(p);
  }
  out.expressions = driving.expressions;
  out.shape = ref_shape;
  out.lighting = target_light;
  return out;
}

AlignedSequence align_scale_consistent(const DrivingSequence& driving,
                                       const Eigen::VectorXd& ref_shape,
                                       const SHCoefficients& target_light) {
  validate(driving, ref_shape);
  AlignedSequence out;
  out.poses = driving.poses;
  out.expressions = driving.expressions;
  out.shape = ref_shape;
  out.lighting = target_light;
  return out;
}

namespace {

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(path + "[" + std::to_string(i) + "]", "expected a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

struct Frames {
  std::vector<PoseParams> poses;
  std::vector<Eigen::VectorXd> expressions;
};

Frames frames_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("frames") || !j.at("frames").is_array()) {
    throw ConfigError("frames", "expected a \"frames\" array");
  }
  Frames out;
  const auto& frames = j.at("frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string path = "frames[" + std::to_string(i) + "]";
    const auto& f = frames[i];
    for (const char* key : {"rotation", "translation", "expression"}) {
      if (!f.contains(key)) throw ConfigError(path + "." + key, "missing");
    }
    PoseParams p;
    const Eigen::VectorXd r = vector_from_json(f.at("rotation"), path + ".rotation");
    const Eigen::VectorXd t = vector_from_json(f.at("translation"), path + ".translation");
    if (r.size() != 3) throw ConfigError(path + ".rotation", "expected 3 values");
    if (t.size() != 3) throw ConfigError(path + ".translation", "expected 3 values");
    p.rotation = r;
    p.translation = t;
    out.poses.push_back(p);
    out.expressions.push_back(vector_from_json(f.at("expression"), path + ".expression"));
  }
  return out;
}

nlohmann::json frames_to_json(const std::vector<PoseParams>& poses,
                              const std::vector<Eigen::VectorXd>& expressions) {
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    nlohmann::json f = pose_to_json(poses[i]);
    f["expression"] = vector_to_json(expressions[i]);
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace

DrivingSequence driving_from_json(const nlohmann::json& j) {
  Frames f = frames_from_json(j);
  return {std::move(f.poses), std::move(f.expressions)};
}

nlohmann::json driving_to_json(const DrivingSequence& seq) {
  return {{"frames", frames_to_json(seq.poses, seq.expressions)}};
}

nlohmann::json aligned_to_json(const AlignedSequence& seq) {
  return {{"frames", frames_to_json(seq.poses, seq.expressions)},
          {"shape", vector_to_json(seq.shape)},
          {"lighting", sh_to_json(seq.lighting)}};
}

AlignedSequence aligned_from_json(const nlohmann::json& j) {
  Frames f = frames_from_json(j);
  AlignedSequence out;
  out.poses = std::move(f.poses);
  out.expressions = std::move(f.expressions);
  if (!j.contains("shape")) throw ConfigError("shape", "missing");
  out.shape = vector_from_json(j.at("shape"), "shape");
  if (!j.contains("lighting")) throw ConfigError("lighting", "missing");
  out.lighting = sh_from_json(j.at("lighting"));
  return out;
}

}  // namespace lcvd
