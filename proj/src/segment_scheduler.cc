// segment_scheduler.cc

// Copyright 2026  The shiftctx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "shiftctx/segment_scheduler.h"

#include <algorithm>
#include <sstream>

#include "shiftctx/error.h"

namespace shiftctx {

namespace {

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

// Lays out the left side [lplus, left, cplus] backwards from the nominal
// center start.
void place_left_side(SegmentPlan *plan, int64_t center_begin, int64_t cplus,
                     int64_t left, int64_t lplus) {
  plan->cplus = {center_begin - cplus, center_begin};
  plan->left = {plan->cplus.begin - left, plan->cplus.begin};
  plan->lplus = {plan->left.begin - lplus, plan->left.begin};
}

// End-of-stream rules: fixed center tiling, left = up to l previous frames,
// right = up to r following frames.  Segment 1 optionally remaps its missing
// left context to an extra right span.
SegmentPlan fixed_segment(int64_t index, int64_t total_len,
                          const SegmentLayout &layout, bool shiftable_left) {
  const int64_t c = layout.center;
  const int64_t b = (index - 1) * c;
  const int64_t e = std::min(b + c, total_len);

  SegmentPlan plan;
  plan.index = index;
  plan.center = {b, e};
  place_left_side(&plan, b, 0, std::min(layout.left, b), 0);
  plan.right = {e, e + std::min(layout.right, total_len - e)};
  plan.rplus = {plan.right.end, plan.right.end};
  if (shiftable_left && index == 1 && e == b + c &&
      plan.right.length() == layout.right) {
    const int64_t extra =
        std::min(layout.left, total_len - plan.right.end);
    plan.rplus.end += extra;
  }
  return plan;
}

// Live-stream rules for segments 2.. under shiftable context.  A partial
// center borrows its deficit from the frames just before it (cplus); any
// unfilled right context is remapped to extra left context (lplus).  Both
// are clipped at frame 0.
SegmentPlan shifted_segment(int64_t index, int64_t available,
                            const SegmentLayout &layout) {
  const int64_t c = layout.center;
  const int64_t b = (index - 1) * c;
  const int64_t e = std::min(b + c, available);

  SegmentPlan plan;
  plan.index = index;
  plan.center = {b, e};
  const int64_t right_len =
      e == b + c ? std::min(layout.right, available - e) : 0;
  plan.right = {e, e + right_len};
  plan.rplus = {plan.right.end, plan.right.end};

  int64_t budget = b;
  const int64_t cplus = std::min(c - (e - b), budget);
  budget -= cplus;
  const int64_t left = std::min(layout.left, budget);
  budget -= left;
  const int64_t lplus = std::min(layout.right - right_len, budget);
  place_left_side(&plan, b, cplus, left, lplus);
  return plan;
}

SegmentPlan streaming_segment(int64_t index, int64_t available,
                              const SegmentLayout &layout, ContextMode mode) {
  if (mode == ContextMode::kBaseline)
    return fixed_segment(index, available, layout, false);
  if (index == 1) return fixed_segment(index, available, layout, true);
  return shifted_segment(index, available, layout);
}

}  // namespace

void SegmentLayout::validate() const {
  std::ostringstream err;
  if (left < 0 || center < 1 || right < 0 || chunk < 1 || subsample < 1) {
    err << "layout out of range: l=" << left << " c=" << center
        << " r=" << right << " h=" << chunk << " f=" << subsample;
    throw ConfigError(err.str());
  }
  if (left % chunk != 0 || center % chunk != 0 || right % chunk != 0) {
    err << "left/center/right (" << left << "/" << center << "/" << right
        << ") must be multiples of the chunk size " << chunk;
    throw ConfigError(err.str());
  }
  if (chunk % subsample != 0) {
    err << "chunk size " << chunk << " is not a multiple of the subsampling "
        << "factor " << subsample;
    throw ConfigError(err.str());
  }
}

std::string to_string(ContextMode mode) {
  return mode == ContextMode::kBaseline ? "baseline" : "shiftable";
}

ContextMode parse_context_mode(const std::string &name) {
  if (name == "baseline") return ContextMode::kBaseline;
  if (name == "shiftable") return ContextMode::kShiftable;
  throw ConfigError("unknown mode '" + name +
                    "' (expected baseline or shiftable)");
}

int64_t SegmentPlan::begin() const {
  for (const Span &s : spans())
    if (!s.empty()) return s.begin;
  return center.begin;
}

int64_t SegmentPlan::end() const {
  const auto all = spans();
  for (auto it = all.rbegin(); it != all.rend(); ++it)
    if (!it->empty()) return it->end;
  return center.end;
}

std::vector<SegmentPlan> offline_plan(int64_t total_len,
                                      const SegmentLayout &layout,
                                      bool shiftable_left) {
  layout.validate();
  if (total_len <= 0) throw EmptyInputError("offline_plan: empty input");
  const int64_t count = ceil_div(total_len, layout.center);
  std::vector<SegmentPlan> plans;
  plans.reserve(count);
  for (int64_t n = 1; n <= count; ++n) {
    plans.push_back(fixed_segment(n, total_len, layout, shiftable_left));
    plans.back().finalized = true;
  }
  return plans;
}

int64_t finalization_point(int64_t index, const SegmentLayout &layout,
                           ContextMode mode) {
  const int64_t center_end = index * layout.center;
  if (mode == ContextMode::kShiftable && index == 1)
    return center_end + layout.right + layout.left;
  return center_end + layout.right;
}

std::vector<SegmentPlan> streaming_plan(int64_t available_len,
                                        const SegmentLayout &layout,
                                        ContextMode mode) {
  layout.validate();
  if (available_len <= 0 || available_len % layout.chunk != 0) {
    throw AlignmentError("streaming_plan: available_len " +
                         std::to_string(available_len) +
                         " is not a positive multiple of the chunk size " +
                         std::to_string(layout.chunk));
  }
  const int64_t count = ceil_div(available_len, layout.center);
  std::vector<SegmentPlan> plans;
  plans.reserve(count);
  bool prefix_final = true;
  for (int64_t n = 1; n <= count; ++n) {
    plans.push_back(streaming_segment(n, available_len, layout, mode));
    prefix_final =
        prefix_final && available_len >= finalization_point(n, layout, mode);
    plans.back().finalized = prefix_final;
  }
  return plans;
}

std::string format_plan(const SegmentPlan &plan) {
  return std::to_string(plan.left_side()) + "+" +
         std::to_string(plan.center.length()) + "+" +
         std::to_string(plan.right_side());
}

std::string serialize_plan(const SegmentPlan &plan) {
  return "n=" + std::to_string(plan.index) + " spans=" + format_plan(plan) +
         " final=" + (plan.finalized ? "1" : "0");
}

void check_plan(const SegmentPlan &plan, const SegmentLayout &layout) {
  auto fail = [&](const std::string &what) {
    throw Error("segment " + std::to_string(plan.index) + " (" +
                format_plan(plan) + "): " + what);
  };
  const auto all = plan.spans();
  if (all[0].begin < 0) fail("starts before frame 0");
  for (size_t i = 0; i < all.size(); ++i) {
    if (all[i].end < all[i].begin) fail("negative span");
    if (i > 0 && all[i].begin != all[i - 1].end) fail("spans not contiguous");
  }
  const int64_t c = layout.center;
  const int64_t nominal = (plan.index - 1) * c;
  if (plan.center.empty()) fail("empty center");
  if (plan.center.begin != nominal || plan.center.end > nominal + c)
    fail("center outside its nominal block");
  if (plan.cplus.length() + plan.center.length() > c) fail("cplus too large");
  if (plan.lplus.length() > layout.right) fail("lplus exceeds r");
  if (plan.rplus.length() > layout.left) fail("rplus exceeds l");
  if (plan.total() > layout.segment_size()) fail("segment larger than l+c+r");
  if (!plan.cplus.empty() && !plan.rplus.empty())
    fail("cplus and rplus both active");
  if (!plan.lplus.empty() && plan.right.length() >= layout.right)
    fail("lplus active with a full right context");
}

SegmentScheduler::SegmentScheduler(const SegmentLayout &layout,
                                   ContextMode mode)
    : layout_(layout), mode_(mode) {
  layout_.validate();
}

SchedulerStep SegmentScheduler::advance(int64_t chunks) {
  if (finished_) throw LifecycleError("advance called after finish");
  if (chunks < 1) throw PreconditionError("advance: chunk count must be >= 1");
  frames_seen_ += chunks * layout_.chunk;

  SchedulerStep step;
  trailing_.clear();
  const int64_t first = static_cast<int64_t>(finalized_.size()) + 1;
  const int64_t last = ceil_div(frames_seen_, layout_.center);
  bool prefix_final = true;
  for (int64_t n = first; n <= last; ++n) {
    SegmentPlan plan = streaming_segment(n, frames_seen_, layout_, mode_);
    prefix_final =
        prefix_final && frames_seen_ >= finalization_point(n, layout_, mode_);
    plan.finalized = prefix_final;
    step.recompute.push_back(plan);
    if (plan.finalized) {
      finalized_.push_back(plan);
      step.newly_finalized.push_back(plan);
    } else {
      trailing_.push_back(plan);
    }
  }
  return step;
}

SchedulerStep SegmentScheduler::finish() {
  if (finished_) throw LifecycleError("finish called twice");
  if (frames_seen_ == 0) throw EmptyInputError("finish: no frames received");
  finished_ = true;
  SchedulerStep step;
  for (const SegmentPlan &old : trailing_) {
    SegmentPlan plan = fixed_segment(old.index, frames_seen_, layout_,
                                     mode_ == ContextMode::kShiftable);
    plan.finalized = true;
    finalized_.push_back(plan);
    step.recompute.push_back(plan);
    step.newly_finalized.push_back(plan);
  }
  trailing_.clear();
  return step;
}

std::vector<SegmentPlan> SegmentScheduler::plans() const {
  std::vector<SegmentPlan> all = finalized_;
  all.insert(all.end(), trailing_.begin(), trailing_.end());
  return all;
}

}  // namespace shiftctx
