#pragma once

#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "lcvd/parametric_face.hpp"
#include "lcvd/sh_shading.hpp"

namespace lcvd {

// Per-frame pose and expression parameters extracted from a driving video.
struct DrivingSequence {
  std::vector<PoseParams> poses;
  std::vector<Eigen::VectorXd> expressions;

  std::size_t size() const { return poses.size(); }
};

// Parameters ready for hint rendering: one pose and expression per frame, a
// single reference shape and the target lighting.
struct AlignedSequence {
  std::vector<PoseParams> poses;
  std::vector<Eigen::VectorXd> expressions;
  Eigen::VectorXd shape;
  SHCoefficients lighting;

  std::size_t size() const { return poses.size(); }
};

enum class AlignmentMode { kRelative, kScaleConsistent };

// Reference pose plus first-frame-relative driving offsets, added
// componentwise in axis-angle/translation space:
//   aligned_i = ref_pose + (driving_i - driving_0)
AlignedSequence align_relative(const DrivingSequence& driving, const PoseParams& ref_pose,
                               const Eigen::VectorXd& ref_shape, const SHCoefficients& target_light);

// Driving poses used verbatim with the reference shape.
AlignedSequence align_scale_consistent(const DrivingSequence& driving,
                                       const Eigen::VectorXd& ref_shape,
                                       const SHCoefficients& target_light);

// {"frames": [{"rotation": [3], "translation": [3], "expression": [|e|]}, ...]}
DrivingSequence driving_from_json(const nlohmann::json& j);
nlohmann::json driving_to_json(const DrivingSequence& seq);

// Driving schema plus "shape" and "lighting" blocks.
nlohmann::json aligned_to_json(const AlignedSequence& seq);
AlignedSequence aligned_from_json(const nlohmann::json& j);

}  // namespace lcvd
