// shiftctx/amt_encoder.h

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

#ifndef SHIFTCTX_AMT_ENCODER_H_
#define SHIFTCTX_AMT_ENCODER_H_

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "shiftctx/segment_scheduler.h"
#include "shiftctx/tensor.h"

namespace shiftctx {

struct EncoderConfig {
  int64_t input_dim = 16;
  int64_t d_model = 64;
  int64_t layers = 2;
  int64_t heads = 4;
  int64_t ffn_dim = 256;
  int64_t banks = 3;   // memory-bank capacity N
  int64_t clip = 16;   // relative-position clipping distance
  int64_t subsample = 4;
  uint64_t seed = 1;

  void validate() const;
};

struct EncoderLayerWeights {
  Matrix wq, wk, wv, wo;  // d x d, applied as x * W
  Matrix rel_k, rel_v;    // (2 * clip + 1) x head_dim, row = offset + clip
  Matrix ffn1_w, ffn1_b;  // d x ffn, 1 x ffn
  Matrix ffn2_w, ffn2_b;  // ffn x d, 1 x d
};

/// Seeded random encoder parameters.
///
/// Binary layout written by save() (all integers little-endian):
///   char[4] "AMTW", u32 version (1),
///   u32 d_model, u32 layers, u32 heads, u32 banks, u32 subsample,
///   u32 input_dim, u32 clip, u32 ffn_dim, u64 seed,
/// followed by float32 little-endian row-major matrices in this order:
///   conv1_w (3*input_dim x d), conv1_b (1 x d), conv2_w (3*d x d),
///   conv2_b (1 x d), then per layer: wq, wk, wv, wo, rel_k, rel_v,
///   ffn1_w, ffn1_b, ffn2_w, ffn2_b.
struct EncoderWeights {
  EncoderConfig config;
  Matrix conv1_w, conv1_b;
  Matrix conv2_w, conv2_b;
  std::vector<EncoderLayerWeights> layers;

  static EncoderWeights random(const EncoderConfig &config);
  void save(const std::string &path) const;
  static EncoderWeights load(const std::string &path);
};

/// Strides of the two subsampling convolutions; their product is the
/// subsampling factor.
std::pair<int64_t, int64_t> subsample_strides(int64_t factor);

/// Two kernel-3 strided convolutions with a ReLU in between.  Maps
/// [t x input_dim] frames to [t / subsample x d_model] tokens.
Matrix subsample(const EncoderWeights &w, const Matrix &frames);

/// Memory banks of the most recent segments, oldest first, at most
/// config.banks entries.  Each entry holds one bank vector per layer.
class BankStack {
 public:
  explicit BankStack(int64_t capacity = 0) : capacity_(capacity) {}

  /// `banks` is layers x d.  Indices must increase strictly.
  void push(int64_t segment_index, const Matrix &banks);

  /// size() x d matrix of the banks for one layer.
  Matrix layer(int64_t layer) const;
  std::vector<int64_t> segment_indices() const;
  int64_t size() const { return static_cast<int64_t>(entries_.size()); }
  int64_t capacity() const { return capacity_; }

 private:
  struct Entry {
    int64_t segment;
    Matrix banks;
  };
  int64_t capacity_;
  std::deque<Entry> entries_;
};

struct SegmentEncoding {
  Matrix center;  // |center| / subsample x d
  Matrix banks;   // layers x d, the summarization-query outputs
};

/// Runs one segment through the encoder.  `segment_frames` holds the
/// frames [plan.begin(), plan.end()).  Only outputs at center positions are
/// returned.
SegmentEncoding encode_segment(const EncoderWeights &w, const SegmentPlan &plan,
                               const Matrix &segment_frames,
                               const BankStack &banks);

/// Whole-input reference pass: offline_plan, then every segment in order
/// with its bank committed before the next one.
Matrix offline_encode(const EncoderWeights &w, const Matrix &frames,
                      const SegmentLayout &layout, bool shiftable_left);

/// Fixed-capacity frame store addressed by absolute frame index.
class FrameBuffer {
 public:
  FrameBuffer(int64_t capacity, int64_t width);

  void push(const Matrix &chunk);
  /// Copy of frames [begin, end); throws if any were evicted.
  Matrix slice(int64_t begin, int64_t end) const;

  int64_t first_frame() const { return total_ - size_; }
  int64_t total() const { return total_; }
  int64_t size() const { return size_; }
  int64_t capacity() const { return capacity_; }

 private:
  int64_t capacity_;
  int64_t width_;
  int64_t total_ = 0;
  int64_t size_ = 0;
  std::vector<float> data_;
};

struct StreamStepStats {
  int64_t segments_encoded = 0;
  int64_t newly_finalized = 0;
  double encode_us = 0.0;
};

/// Chunk-by-chunk encoder.  Finalized segments are encoded once; trailing
/// segments are re-encoded on every step with step-local provisional banks.
class StreamingEncoder {
 public:
  StreamingEncoder(std::shared_ptr<const EncoderWeights> weights,
                   const SegmentLayout &layout, ContextMode mode);

  /// Appends one chunk (layout.chunk x input_dim).  Returns all center
  /// outputs for [0, frames_seen), provisional rows included.
  Eigen::Map<const Matrix> step(const Matrix &chunk);

  /// End of stream: finalizes and re-encodes the trailing segments.
  Eigen::Map<const Matrix> finish();

  Eigen::Map<const Matrix> outputs() const;
  /// First output row that may still change.
  int64_t provisional_row() const;

  int64_t frames_seen() const { return scheduler_.frames_seen(); }
  bool finished() const { return scheduler_.finished(); }
  const StreamStepStats &last_step() const { return last_step_; }
  const SegmentScheduler &scheduler() const { return scheduler_; }
  const BankStack &banks() const { return committed_; }
  const FrameBuffer &buffer() const { return buffer_; }
  const EncoderWeights &weights() const { return *weights_; }

 private:
  void run(const SchedulerStep &step);

  std::shared_ptr<const EncoderWeights> weights_;
  SegmentScheduler scheduler_;
  FrameBuffer buffer_;
  BankStack committed_;
  std::vector<float> outputs_;
  int64_t rows_ = 0;
  StreamStepStats last_step_;
};

}  // namespace shiftctx

#endif  // SHIFTCTX_AMT_ENCODER_H_
