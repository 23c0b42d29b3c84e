// test_segment_scheduler.cc

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

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "shiftctx/error.h"
#include "shiftctx/segment_scheduler.h"

using namespace shiftctx;

namespace {

const SegmentLayout kDefaultLayout{32, 64, 32, 32, 4};

std::string joined(const std::vector<SegmentPlan> &plans) {
  std::string out;
  for (const auto &p : plans) {
    if (!out.empty()) out += " | ";
    out += format_plan(p);
  }
  return out;
}

// Brute-force oracle: labels frames one at a time instead of computing span
// arithmetic.  Returns the (left-side, center, right-side) triple plus the
// individual span lengths [lplus, left, cplus, center, right, rplus].
std::array<int64_t, 6> oracle_spans(int64_t n, int64_t avail,
                                    const SegmentLayout &lay,
                                    ContextMode mode) {
  const int64_t b = (n - 1) * lay.center;
  int64_t center = 0, right = 0, rplus = 0;
  for (int64_t x = b; x < b + lay.center; ++x)
    if (x < avail) ++center;
  if (center == lay.center)
    for (int64_t x = b + lay.center; x < b + lay.center + lay.right; ++x)
      if (x < avail) ++right;
  if (mode == ContextMode::kShiftable && n == 1 && center == lay.center &&
      right == lay.right) {
    for (int64_t x = lay.center + lay.right;
         x < lay.center + lay.right + lay.left; ++x)
      if (x < avail) ++rplus;
  }
  int64_t lplus = 0, left = 0, cplus = 0;
  if (mode == ContextMode::kBaseline || n == 1) {
    for (int64_t x = b - 1; x >= 0 && x >= b - lay.left; --x) ++left;
  } else {
    const int64_t target =
        std::min(lay.segment_size(), b + center + right);
    int64_t size = center + right;
    for (int64_t x = b - 1; x >= 0 && size < target; --x, ++size) {
      if (cplus < lay.center - center)
        ++cplus;
      else if (left < lay.left)
        ++left;
      else
        ++lplus;
    }
  }
  return {lplus, left, cplus, center, right, rplus};
}

std::array<int64_t, 6> lengths(const SegmentPlan &p) {
  std::array<int64_t, 6> out{};
  const auto s = p.spans();
  for (size_t i = 0; i < s.size(); ++i) out[i] = s[i].length();
  return out;
}

SegmentLayout random_layout(std::mt19937_64 &rng) {
  std::uniform_int_distribution<int64_t> mult(1, 3);
  std::uniform_int_distribution<int> fpick(0, 2);
  const int64_t f = std::array<int64_t, 3>{1, 2, 4}[fpick(rng)];
  const int64_t h = f * std::uniform_int_distribution<int64_t>(1, 4)(rng);
  return {mult(rng) * h, mult(rng) * h, mult(rng) * h, h, f};
}

}  // namespace

TEST_CASE("layout validation") {
  CHECK_NOTHROW(kDefaultLayout.validate());
  CHECK(kDefaultLayout.segment_size() == 128);
  CHECK_THROWS_AS((SegmentLayout{32, 0, 32, 32, 4}.validate()), ConfigError);
  CHECK_THROWS_AS((SegmentLayout{16, 64, 32, 32, 4}.validate()), ConfigError);
  CHECK_THROWS_AS((SegmentLayout{32, 64, 32, 30, 4}.validate()), ConfigError);
  CHECK_NOTHROW((SegmentLayout{0, 32, 0, 32, 4}.validate()));
}

TEST_CASE("offline_plan tiling") {
  auto plans = offline_plan(256, kDefaultLayout, false);
  REQUIRE(plans.size() == 4);
  CHECK(joined(plans) == "0+64+32 | 32+64+32 | 32+64+32 | 32+64+0");

  plans = offline_plan(256, kDefaultLayout, true);
  CHECK(joined(plans) == "0+64+64 | 32+64+32 | 32+64+32 | 32+64+0");
  CHECK(plans[0].rplus == Span{96, 128});
  CHECK(plans[0].right == Span{64, 96});

  plans = offline_plan(64, kDefaultLayout, false);
  REQUIRE(plans.size() == 1);
  CHECK(format_plan(plans[0]) == "0+64+0");

  for (const auto &p : offline_plan(256, kDefaultLayout, true)) {
    CHECK(p.finalized);
    CHECK_NOTHROW(check_plan(p, kDefaultLayout));
  }
  CHECK_THROWS_AS(offline_plan(0, kDefaultLayout, false), EmptyInputError);
}

TEST_CASE("streaming_plan reproduces the reference walkthrough") {
  using M = ContextMode;
  CHECK(joined(streaming_plan(160, kDefaultLayout, M::kBaseline)) ==
        "0+64+32 | 32+64+32 | 32+32+0");
  // Prose reading of the 192-frame baseline case (the listed triple repeats
  // 0+64+32 for the last segment).
  CHECK(joined(streaming_plan(192, kDefaultLayout, M::kBaseline)) ==
        "0+64+32 | 32+64+32 | 32+64+0");
  CHECK(joined(streaming_plan(224, kDefaultLayout, M::kBaseline)) ==
        "0+64+32 | 32+64+32 | 32+64+32 | 32+32+0");
  CHECK(joined(streaming_plan(160, kDefaultLayout, M::kShiftable)) ==
        "0+64+64 | 32+64+32 | 96+32+0");
  CHECK(joined(streaming_plan(192, kDefaultLayout, M::kShiftable)) ==
        "0+64+64 | 32+64+32 | 64+64+0");
  CHECK(joined(streaming_plan(224, kDefaultLayout, M::kShiftable)) ==
        "0+64+64 | 32+64+32 | 32+64+32 | 96+32+0");
  CHECK(joined(streaming_plan(32, kDefaultLayout, M::kShiftable)) == "0+32+0");
  CHECK(joined(streaming_plan(32, kDefaultLayout, M::kBaseline)) == "0+32+0");

  auto p = streaming_plan(160, kDefaultLayout, M::kShiftable)[2];
  CHECK(p.cplus == Span{96, 128});
  CHECK(p.left == Span{64, 96});
  CHECK(p.lplus == Span{32, 64});
  CHECK(p.center == Span{128, 160});

  CHECK_THROWS_AS(streaming_plan(100, kDefaultLayout, M::kShiftable),
                  AlignmentError);
  CHECK_THROWS_AS(streaming_plan(0, kDefaultLayout, M::kBaseline),
                  AlignmentError);
}

TEST_CASE("format and serialize") {
  SegmentPlan p;
  p.index = 3;
  p.lplus = {32, 64};
  p.left = {64, 96};
  p.cplus = {96, 128};
  p.center = {128, 160};
  p.right = {160, 160};
  p.rplus = {160, 160};
  CHECK(format_plan(p) == "96+32+0");
  CHECK(serialize_plan(p) == "n=3 spans=96+32+0 final=0");

  SegmentPlan first;
  first.index = 1;
  first.center = {0, 64};
  first.right = {64, 96};
  first.rplus = {96, 128};
  first.finalized = true;
  CHECK(format_plan(first) == "0+64+64");
  CHECK(serialize_plan(first) == "n=1 spans=0+64+64 final=1");

  CHECK(format_plan(offline_plan(256, kDefaultLayout, false)[1]) == "32+64+32");
}

TEST_CASE("check_plan rejects broken plans") {
  auto p = streaming_plan(160, kDefaultLayout, ContextMode::kShiftable)[2];
  CHECK_NOTHROW(check_plan(p, kDefaultLayout));
  auto gap = p;
  gap.left.begin -= 4;
  gap.lplus = {gap.left.begin - 28, gap.left.begin - 4};
  CHECK_THROWS_AS(check_plan(gap, kDefaultLayout), Error);
  auto both = offline_plan(256, kDefaultLayout, true)[0];
  both.cplus = {0, 0};
  both.rplus = {96, 160};
  CHECK_THROWS_AS(check_plan(both, kDefaultLayout), Error);
}

TEST_CASE("streaming_plan matches the frame-labelling oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto lay = random_layout(rng);
    for (auto mode : {ContextMode::kBaseline, ContextMode::kShiftable}) {
      const int64_t chunks =
          std::uniform_int_distribution<int64_t>(1, 40)(rng);
      const int64_t avail = chunks * lay.chunk;
      for (const auto &p : streaming_plan(avail, lay, mode)) {
        CHECK(lengths(p) == oracle_spans(p.index, avail, lay, mode));
        CHECK_NOTHROW(check_plan(p, lay));
      }
    }
  }
}

TEST_CASE("size law and max-shift bounds") {
  std::mt19937_64 rng(11);
  bool baseline_short_seen = false;
  for (int trial = 0; trial < 300; ++trial) {
    const auto lay = random_layout(rng);
    const int64_t s = lay.segment_size();
    for (int64_t avail = lay.chunk; avail <= 12 * s; avail += lay.chunk) {
      for (const auto &p :
           streaming_plan(avail, lay, ContextMode::kShiftable)) {
        const int64_t b = p.center.begin;
        const int64_t filled = p.center.length();
        const int64_t reach = lay.right + (p.index == 1 ? lay.left : 0);
        const int64_t right_avail =
            filled < lay.center ? 0
                                : std::min(reach, avail - (b + lay.center));
        CHECK(p.total() == std::min(s, b + filled + right_avail));
        CHECK(p.cplus.length() <= lay.center - lay.chunk);
        CHECK(p.lplus.length() <= lay.right);
        CHECK(p.rplus.length() <= lay.left);
      }
      for (const auto &p :
           streaming_plan(avail, lay, ContextMode::kBaseline)) {
        if (!p.finalized && p.total() < std::min(s, avail))
          baseline_short_seen = true;
      }
    }
  }
  CHECK(baseline_short_seen);
}

TEST_CASE("trailing plans span min(s, frames_seen) in shiftable mode") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto lay = random_layout(rng);
    for (int64_t avail = lay.chunk; avail <= 10 * lay.segment_size();
         avail += lay.chunk) {
      const auto plans = streaming_plan(avail, lay, ContextMode::kShiftable);
      const auto &last = plans.back();
      CHECK(last.end() == avail);
      CHECK(last.total() == std::min(lay.segment_size(), avail));
    }
  }
}

TEST_CASE("scheduler finalization examples") {
  SegmentScheduler shift(kDefaultLayout, ContextMode::kShiftable);
  shift.advance(3);
  CHECK(shift.finalized().empty());
  auto step = shift.advance();
  CHECK(shift.frames_seen() == 128);
  REQUIRE(step.newly_finalized.size() == 1);
  CHECK(serialize_plan(step.newly_finalized[0]) == "n=1 spans=0+64+64 final=1");

  SegmentScheduler base(kDefaultLayout, ContextMode::kBaseline);
  base.advance(4);
  step = base.advance();
  REQUIRE(step.newly_finalized.size() == 1);
  CHECK(serialize_plan(step.newly_finalized[0]) == "n=2 spans=32+64+32 final=1");
  REQUIRE(base.trailing().size() == 1);
  CHECK(serialize_plan(base.trailing()[0]) == "n=3 spans=32+32+0 final=0");
  CHECK(step.recompute.size() == 2);
}

TEST_CASE("scheduler lifecycle") {
  SegmentScheduler s(kDefaultLayout, ContextMode::kShiftable);
  CHECK_THROWS_AS(s.finish(), EmptyInputError);
  s.advance(5);
  auto done = s.finish();
  CHECK(s.trailing().empty());
  REQUIRE(done.newly_finalized.size() == 1);
  CHECK(format_plan(done.newly_finalized[0]) == "32+32+0");
  CHECK_THROWS_AS(s.advance(), LifecycleError);
  CHECK_THROWS_AS(s.finish(), LifecycleError);
}

TEST_CASE("recompute set stays bounded over a long stream") {
  for (auto mode : {ContextMode::kBaseline, ContextMode::kShiftable}) {
    SegmentScheduler s(kDefaultLayout, mode);
    size_t worst = 0;
    while (s.frames_seen() < 10000) {
      auto step = s.advance();
      worst = std::max(worst, step.recompute.size());
      CHECK(step.recompute.size() <= 3);
    }
    const int64_t bound =
        (kDefaultLayout.left + kDefaultLayout.right + kDefaultLayout.center - 1) /
            kDefaultLayout.center + 1;
    CHECK(static_cast<int64_t>(worst) <= bound);
  }
}

TEST_CASE("batched advance equals single-chunk advances") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto lay = random_layout(rng);
    for (auto mode : {ContextMode::kBaseline, ContextMode::kShiftable}) {
      SegmentScheduler one(lay, mode), many(lay, mode);
      for (int i = 0; i < 20; ++i) {
        const int64_t k = std::uniform_int_distribution<int64_t>(1, 3)(rng);
        for (int64_t j = 0; j < k; ++j) one.advance();
        many.advance(k);
        CHECK(one.plans() == many.plans());
      }
    }
  }
}
