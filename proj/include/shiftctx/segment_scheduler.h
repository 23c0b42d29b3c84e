// shiftctx/segment_scheduler.h

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

#ifndef SHIFTCTX_SEGMENT_SCHEDULER_H_
#define SHIFTCTX_SEGMENT_SCHEDULER_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace shiftctx {

/// Half-open frame interval [begin, end).
struct Span {
  int64_t begin = 0;
  int64_t end = 0;

  int64_t length() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool operator==(const Span &) const = default;
};

/// Context sizes of a segment, in input frames.  A segment is the
/// concatenation [left, center, right]; `chunk` frames arrive per stream
/// step and `subsample` frames collapse into one encoder token.
struct SegmentLayout {
  int64_t left = 32;
  int64_t center = 64;
  int64_t right = 32;
  int64_t chunk = 32;
  int64_t subsample = 4;

  int64_t segment_size() const { return left + center + right; }

  /// Throws ConfigError unless every size is in range and aligned
  /// (left/center/right divisible by chunk, chunk divisible by subsample).
  void validate() const;

  bool operator==(const SegmentLayout &) const = default;
};

enum class ContextMode { kBaseline, kShiftable };

std::string to_string(ContextMode mode);
/// Accepts "baseline" or "shiftable"; throws ConfigError otherwise.
ContextMode parse_context_mode(const std::string &name);

/// One segment of the decomposition.  Spans are laid out contiguously in the
/// order [lplus, left, cplus, center, right, rplus]; only `center` produces
/// outputs, everything else is context.
struct SegmentPlan {
  int64_t index = 0;  // 1-based
  Span lplus, left, cplus, center, right, rplus;
  bool finalized = false;

  std::array<Span, 6> spans() const {
    return {lplus, left, cplus, center, right, rplus};
  }
  int64_t begin() const;
  int64_t end() const;
  int64_t total() const { return end() - begin(); }
  int64_t left_side() const {
    return lplus.length() + left.length() + cplus.length();
  }
  int64_t right_side() const { return right.length() + rplus.length(); }

  bool operator==(const SegmentPlan &) const = default;
};

/// Decomposition of a complete sequence of `total_len` frames, as used for
/// training-style (whole input available) processing.  With
/// `shiftable_left`, the first segment trades its (empty) left context for
/// up to `left` extra frames after its right context.
std::vector<SegmentPlan> offline_plan(int64_t total_len,
                                      const SegmentLayout &layout,
                                      bool shiftable_left);

/// Decomposition of the first `available_len` frames of a live stream.
/// Plans whose spans can no longer change are marked finalized.
std::vector<SegmentPlan> streaming_plan(int64_t available_len,
                                        const SegmentLayout &layout,
                                        ContextMode mode);

/// Frames that must have arrived before segment `index` stops changing.
int64_t finalization_point(int64_t index, const SegmentLayout &layout,
                           ContextMode mode);

/// "A+B+C": left-side, center and right-side frame counts.
std::string format_plan(const SegmentPlan &plan);

/// Line form used by golden files: "n=<idx> spans=<A+B+C> final=<0|1>".
std::string serialize_plan(const SegmentPlan &plan);

/// Throws Error if `plan` breaks a structural invariant for `layout`.
void check_plan(const SegmentPlan &plan, const SegmentLayout &layout);

struct SchedulerStep {
  /// Plans whose encoder work must be redone, in segment order.
  std::vector<SegmentPlan> recompute;
  /// Subset of `recompute` that became final on this step.
  std::vector<SegmentPlan> newly_finalized;
};

/// Incremental form of streaming_plan.  Finalized plans are kept and never
/// revisited; only the trailing plans are rebuilt on each chunk.
class SegmentScheduler {
 public:
  SegmentScheduler(const SegmentLayout &layout, ContextMode mode);

  /// Consumes `chunks` chunks of `layout.chunk` frames each.
  SchedulerStep advance(int64_t chunks = 1);

  /// End of stream: trailing plans are re-planned with end-of-stream rules
  /// (truncated right context, no shifting) and finalized.
  SchedulerStep finish();

  const SegmentLayout &layout() const { return layout_; }
  ContextMode mode() const { return mode_; }
  int64_t frames_seen() const { return frames_seen_; }
  bool finished() const { return finished_; }
  const std::vector<SegmentPlan> &finalized() const { return finalized_; }
  const std::vector<SegmentPlan> &trailing() const { return trailing_; }

  /// finalized() followed by trailing().
  std::vector<SegmentPlan> plans() const;

 private:
  SegmentLayout layout_;
  ContextMode mode_;
  int64_t frames_seen_ = 0;
  bool finished_ = false;
  std::vector<SegmentPlan> finalized_;
  std::vector<SegmentPlan> trailing_;
};

}  // namespace shiftctx

#endif  // SHIFTCTX_SEGMENT_SCHEDULER_H_
