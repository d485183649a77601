#include "lcvd/windowed_sampler.hpp"

#include <algorithm>
#include <string>

#include "lcvd/error.hpp"

namespace lcvd {

std::size_t WindowPlan::overlap_with_previous(std::size_t i) const {
  if (i == 0 || i >= windows.size()) return 0;
  const Window& a = windows[i - 1];
  const Window& b = windows[i];
  return a.end > b.start ? a.end - b.start : 0;
}

WindowPlan plan_windows(std::size_t total_frames, std::size_t window_len, std::size_t overlap) {
  if (total_frames < 1) throw Error("plan_windows: need at least one frame");
  if (window_len < 1) throw Error("plan_windows: window length must be positive");
  if (overlap >= window_len) {
    throw Error("plan_windows: overlap " + std::to_string(overlap) +
                " must be smaller than window length " + std::to_string(window_len));
  }
  WindowPlan plan;
  plan.total = total_frames;
  plan.window_len = window_len;
  plan.overlap = overlap;
  if (total_frames <= window_len) {
    plan.windows.push_back({0, total_frames});
    return plan;
  }
  const std::size_t stride = window_len - overlap;
  std::size_t start = 0;
  while (start + window_len < total_frames) {
    plan.windows.push_back({start, start + window_len});
    start += stride;
  }
  plan.windows.push_back({total_frames - window_len, total_frames});
  return plan;
}

LatentSeq blend_overlap(const LatentSeq& prev, const LatentSeq& next) {
  require_same_shape(prev, next, "blend_overlap");
  const std::size_t k = prev.frames();
  const std::size_t per_frame = k ? prev.size() / k : 0;
  LatentSeq out(Tensor4(prev.shape()));
  auto p = prev.values();
  auto n = next.values();
  auto o = out.values();
  for (std::size_t f = 0; f < k; ++f) {
    const double w = blend_weight(f, k);
    for (std::size_t i = f * per_frame; i < (f + 1) * per_frame; ++i) {
      o[i] = p[i] + w * (n[i] - p[i]);  // exact when both windows agree
    }
  }
  return out;
}

LatentSeq slice_frames(const LatentSeq& seq, std::size_t start, std::size_t end) {
  if (start > end || end > seq.frames()) throw ShapeError("slice_frames: range out of bounds");
  LatentSeq out(end - start, seq.height(), seq.width(), seq.channels());
  const std::size_t per_frame = seq.height() * seq.width() * seq.channels();
  std::copy_n(seq.values().begin() + static_cast<std::ptrdiff_t>(start * per_frame),
              out.size(), out.values().begin());
  return out;
}

FeatureStack slice_frames(const FeatureStack& seq, std::size_t start, std::size_t end) {
  if (start > end || end > seq.frames()) throw ShapeError("slice_frames: range out of bounds");
  FeatureStack out(end - start, seq.channels(), seq.height(), seq.width());
  const std::size_t per_frame = seq.channels() * seq.height() * seq.width();
  std::copy_n(seq.values().begin() + static_cast<std::ptrdiff_t>(start * per_frame),
              out.size(), out.values().begin());
  return out;
}

LatentSeq assemble_windows(const WindowPlan& plan, const std::vector<LatentSeq>& outputs) {
  if (outputs.size() != plan.windows.size() || outputs.empty()) {
    throw ShapeError("assemble_windows: expected " + std::to_string(plan.windows.size()) +
                     " window outputs, got " + std::to_string(outputs.size()));
  }
  const LatentSeq& first = outputs.front();
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const LatentSeq& o = outputs[i];
    if (o.frames() != plan.windows[i].length() || o.height() != first.height() ||
        o.width() != first.width() || o.channels() != first.channels()) {
      throw ShapeError("assemble_windows: window " + std::to_string(i) + " has shape " +
                       shape_string(o.shape()));
    }
  }
  const std::size_t per_frame = first.height() * first.width() * first.channels();
  LatentSeq out(plan.total, first.height(), first.width(), first.channels());
  auto dst = out.values();
  auto put = [&](const LatentSeq& src, std::size_t src_frame, std::size_t dst_frame) {
    std::copy_n(src.values().begin() + static_cast<std::ptrdiff_t>(src_frame * per_frame),
                per_frame, dst.begin() + static_cast<std::ptrdiff_t>(dst_frame * per_frame));
  };

  for (std::size_t f = 0; f < first.frames(); ++f) put(first, f, f);
  for (std::size_t i = 1; i < outputs.size(); ++i) {
    const Window& w = plan.windows[i];
    const std::size_t k = plan.overlap_with_previous(i);
    if (k > 0) {
      const LatentSeq prev = slice_frames(out, w.start, w.start + k);
      const LatentSeq blended = blend_overlap(prev, slice_frames(outputs[i], 0, k));
      for (std::size_t f = 0; f < k; ++f) put(blended, f, w.start + f);
    }
    for (std::size_t f = k; f < w.length(); ++f) put(outputs[i], f, w.start + f);
  }
  return out;
}

nlohmann::json plan_to_json(const WindowPlan& plan) {
  nlohmann::json windows = nlohmann::json::array();
  for (const Window& w : plan.windows) windows.push_back({w.start, w.end});
  return {{"total", plan.total},
          {"window_len", plan.window_len},
          {"overlap", plan.overlap},
          {"windows", windows}};
}

}  // namespace lcvd
