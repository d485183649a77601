#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "lcvd/tensor.hpp"

namespace lcvd {

inline constexpr std::size_t kDefaultWindowLength = 16;
inline constexpr std::size_t kDefaultWindowOverlap = 6;

struct Window {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive

  std::size_t length() const { return end - start; }
  friend bool operator==(const Window&, const Window&) = default;
};

struct WindowPlan {
  std::vector<Window> windows;
  std::size_t total = 0;
  std::size_t window_len = kDefaultWindowLength;
  std::size_t overlap = kDefaultWindowOverlap;

  // Frames shared by windows i - 1 and i.
  std::size_t overlap_with_previous(std::size_t i) const;
};

// Windows advance by window_len - overlap until one reaches the end; the last
// window is then right-aligned to the final frame, so it may share more than
// `overlap` frames with its predecessor. Sequences no longer than a window
// get a single window (0, total).
WindowPlan plan_windows(std::size_t total_frames, std::size_t window_len = kDefaultWindowLength,
                        std::size_t overlap = kDefaultWindowOverlap);

// Ramp weight given to the later window at overlap position i of k.
inline double blend_weight(std::size_t i, std::size_t k) {
  return static_cast<double>(i + 1) / static_cast<double>(k + 1);
}

// Frame i: (1 - w_i) prev_i + w_i next_i. Both inputs are K x h x w x c.
LatentSeq blend_overlap(const LatentSeq& prev, const LatentSeq& next);

// Stitches per-window outputs (one per plan window, frames = window length)
// into a total-length sequence, ramp-blending every shared span.
LatentSeq assemble_windows(const WindowPlan& plan, const std::vector<LatentSeq>& outputs);

// Frames [start, end) of a sequence.
LatentSeq slice_frames(const LatentSeq& seq, std::size_t start, std::size_t end);
FeatureStack slice_frames(const FeatureStack& seq, std::size_t start, std::size_t end);

nlohmann::json plan_to_json(const WindowPlan& plan);

}  // namespace lcvd
