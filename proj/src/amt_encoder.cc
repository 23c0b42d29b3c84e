// amt_encoder.cc

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

#include "shiftctx/amt_encoder.h"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "shiftctx/error.h"

namespace shiftctx {

namespace {

constexpr std::array<char, 4> kMagic = {'A', 'M', 'T', 'W'};
constexpr uint32_t kFormatVersion = 1;

template <typename T>
void write_le(std::ostream &os, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char bytes[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i)
    bytes[i] = static_cast<unsigned char>(
        static_cast<std::make_unsigned_t<T>>(value) >> (8 * i));
  os.write(reinterpret_cast<const char *>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream &is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char *>(bytes), sizeof(T)))
    throw DataError("weight file truncated");
  std::make_unsigned_t<T> value = 0;
  for (size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<std::make_unsigned_t<T>>(bytes[i]) << (8 * i);
  return static_cast<T>(value);
}

void write_matrix(std::ostream &os, const Matrix &m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      write_le<uint32_t>(os, std::bit_cast<uint32_t>(m(i, j)));
}

Matrix read_matrix(std::istream &is, int64_t rows, int64_t cols) {
  Matrix m(rows, cols);
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j)
      m(i, j) = std::bit_cast<float>(read_le<uint32_t>(is));
  return m;
}

// im2col for a kernel-3, padding-1 convolution: row t holds the inputs at
// t*stride-1, t*stride, t*stride+1 (zeros outside the sequence).
Matrix conv_k3(const Matrix &in, const Matrix &w, const Matrix &b,
               int64_t stride) {
  const int64_t width = in.cols();
  const int64_t out_len = in.rows() / stride;
  Matrix cols = Matrix::Zero(out_len, 3 * width);
  for (int64_t t = 0; t < out_len; ++t) {
    for (int64_t k = 0; k < 3; ++k) {
      const int64_t src = t * stride + k - 1;
      if (src >= 0 && src < in.rows())
        cols.block(t, k * width, 1, width) = in.row(src);
    }
  }
  Matrix out = cols * w;
  out.rowwise() += b.row(0);
  return out;
}

int64_t rel_bucket(int64_t offset, int64_t clip) {
  return std::clamp<int64_t>(offset, -clip, clip) + clip;
}

// One encoder layer over [tokens; sigma] with banks prepended to the keys.
// Returns the updated tokens; the attention output of the summarization
// query is written to *bank.
Matrix encoder_layer(const EncoderLayerWeights &lw, const EncoderConfig &cfg,
                     const Matrix &tokens, const Matrix &banks,
                     RowVector *bank) {
  const int64_t t = tokens.rows();
  const int64_t d = cfg.d_model;
  const int64_t nb = banks.rows();
  const int64_t hd = d / cfg.heads;

  Matrix x(t + 1, d);
  x.topRows(t) = tokens;
  x.row(t) = tokens.colwise().mean();
  const Matrix y = layer_norm(x);

  Matrix kv_in(nb + t + 1, d);
  if (nb > 0) kv_in.topRows(nb) = banks;
  kv_in.bottomRows(t + 1) = y;

  const Matrix q = y * lw.wq;
  const Matrix k = kv_in * lw.wk;
  const Matrix v = kv_in * lw.wv;

  // Relative offsets: banks sit at the most negative clipped offset; the
  // summarization query is at offset 0 from everything else.
  const int64_t rows = t + 1;
  const int64_t cols = nb + t + 1;
  std::vector<int64_t> bucket(rows * cols);
  for (int64_t i = 0; i < rows; ++i) {
    for (int64_t j = 0; j < cols; ++j) {
      int64_t off = 0;
      if (j < nb) {
        off = -cfg.clip;
      } else {
        const int64_t kpos = j - nb;
        if (i < t && kpos < t) off = kpos - i;
      }
      bucket[i * cols + j] = rel_bucket(off, cfg.clip);
    }
  }

  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  Matrix heads_out(rows, d);
  for (int64_t h = 0; h < cfg.heads; ++h) {
    const auto qh = q.middleCols(h * hd, hd);
    const auto kh = k.middleCols(h * hd, hd);
    const auto vh = v.middleCols(h * hd, hd);
    Matrix scores = qh * kh.transpose();
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < cols; ++j)
        scores(i, j) += qh.row(i).dot(lw.rel_k.row(bucket[i * cols + j]));
    scores *= scale;
    softmax_rows(&scores);
    Matrix ctx = scores * vh;
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < cols; ++j)
        ctx.row(i) += scores(i, j) * lw.rel_v.row(bucket[i * cols + j]);
    heads_out.middleCols(h * hd, hd) = ctx;
  }
  const Matrix attn = heads_out * lw.wo;
  *bank = attn.row(t);

  Matrix out = x.topRows(t) + attn.topRows(t);
  Matrix hidden = layer_norm(out) * lw.ffn1_w;
  hidden.rowwise() += lw.ffn1_b.row(0);
  hidden = hidden.cwiseMax(0.0f);
  Matrix ffn = hidden * lw.ffn2_w;
  ffn.rowwise() += lw.ffn2_b.row(0);
  out += ffn;
  return out;
}

}  // namespace

void EncoderConfig::validate() const {
  if (input_dim < 1 || d_model < 1 || layers < 1 || heads < 1 || ffn_dim < 1)
    throw ConfigError("encoder dimensions must be positive");
  if (d_model % heads != 0)
    throw ConfigError("d_model " + std::to_string(d_model) +
                      " is not divisible by heads " + std::to_string(heads));
  if (banks < 0) throw ConfigError("memory-bank count must be >= 0");
  if (clip < 1) throw ConfigError("relative-position clip must be >= 1");
  if (subsample < 1) throw ConfigError("subsampling factor must be >= 1");
}

std::pair<int64_t, int64_t> subsample_strides(int64_t factor) {
  const int64_t first = factor % 2 == 0 ? 2 : 1;
  return {first, factor / first};
}

EncoderWeights EncoderWeights::random(const EncoderConfig &config) {
  config.validate();
  EncoderWeights w;
  w.config = config;
  WeightRng rng(config.seed);
  const int64_t d = config.d_model;
  const int64_t hd = d / config.heads;
  w.conv1_w = rng.glorot(3 * config.input_dim, d);
  w.conv1_b = rng.uniform_matrix(1, d, 0.02f);
  w.conv2_w = rng.glorot(3 * d, d);
  w.conv2_b = rng.uniform_matrix(1, d, 0.02f);
  for (int64_t l = 0; l < config.layers; ++l) {
    EncoderLayerWeights lw;
    lw.wq = rng.glorot(d, d);
    lw.wk = rng.glorot(d, d);
    lw.wv = rng.glorot(d, d);
    lw.wo = rng.glorot(d, d);
    lw.rel_k = rng.uniform_matrix(2 * config.clip + 1, hd, 0.1f);
    lw.rel_v = rng.uniform_matrix(2 * config.clip + 1, hd, 0.1f);
    lw.ffn1_w = rng.glorot(d, config.ffn_dim);
    lw.ffn1_b = rng.uniform_matrix(1, config.ffn_dim, 0.02f);
    lw.ffn2_w = rng.glorot(config.ffn_dim, d);
    lw.ffn2_b = rng.uniform_matrix(1, d, 0.02f);
    w.layers.push_back(std::move(lw));
  }
  return w;
}

void EncoderWeights::save(const std::string &path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  os.write(kMagic.data(), kMagic.size());
  write_le<uint32_t>(os, kFormatVersion);
  for (int64_t v : {config.d_model, config.layers, config.heads, config.banks,
                    config.subsample, config.input_dim, config.clip,
                    config.ffn_dim})
    write_le<uint32_t>(os, static_cast<uint32_t>(v));
  write_le<uint64_t>(os, config.seed);
  write_matrix(os, conv1_w);
  write_matrix(os, conv1_b);
  write_matrix(os, conv2_w);
  write_matrix(os, conv2_b);
  for (const auto &lw : layers) {
    for (const Matrix *m : {&lw.wq, &lw.wk, &lw.wv, &lw.wo, &lw.rel_k,
                            &lw.rel_v, &lw.ffn1_w, &lw.ffn1_b, &lw.ffn2_w,
                            &lw.ffn2_b})
      write_matrix(os, *m);
  }
  if (!os) throw DataError("error writing " + path);
}

EncoderWeights EncoderWeights::load(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic)
    throw DataError(path + ": not an encoder weight file");
  if (read_le<uint32_t>(is) != kFormatVersion)
    throw DataError(path + ": unsupported weight format version");
  EncoderWeights w;
  EncoderConfig &c = w.config;
  c.d_model = read_le<uint32_t>(is);
  c.layers = read_le<uint32_t>(is);
  c.heads = read_le<uint32_t>(is);
  c.banks = read_le<uint32_t>(is);
  c.subsample = read_le<uint32_t>(is);
  c.input_dim = read_le<uint32_t>(is);
  c.clip = read_le<uint32_t>(is);
  c.ffn_dim = read_le<uint32_t>(is);
  c.seed = read_le<uint64_t>(is);
  try {
    c.validate();
  } catch (const ConfigError &e) {
    throw DataError(path + ": " + e.what());
  }
  const int64_t d = c.d_model;
  const int64_t hd = d / c.heads;
  w.conv1_w = read_matrix(is, 3 * c.input_dim, d);
  w.conv1_b = read_matrix(is, 1, d);
  w.conv2_w = read_matrix(is, 3 * d, d);
  w.conv2_b = read_matrix(is, 1, d);
  for (int64_t l = 0; l < c.layers; ++l) {
    EncoderLayerWeights lw;
    lw.wq = read_matrix(is, d, d);
    lw.wk = read_matrix(is, d, d);
    lw.wv = read_matrix(is, d, d);
    lw.wo = read_matrix(is, d, d);
    lw.rel_k = read_matrix(is, 2 * c.clip + 1, hd);
    lw.rel_v = read_matrix(is, 2 * c.clip + 1, hd);
    lw.ffn1_w = read_matrix(is, d, c.ffn_dim);
    lw.ffn1_b = read_matrix(is, 1, c.ffn_dim);
    lw.ffn2_w = read_matrix(is, c.ffn_dim, d);
    lw.ffn2_b = read_matrix(is, 1, d);
    w.layers.push_back(std::move(lw));
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw DataError(path + ": trailing bytes after weights");
  return w;
}

Matrix subsample(const EncoderWeights &w, const Matrix &frames) {
  const int64_t f = w.config.subsample;
  if (frames.cols() != w.config.input_dim)
    throw PreconditionError("subsample: expected " +
                            std::to_string(w.config.input_dim) +
                            " features per frame, got " +
                            std::to_string(frames.cols()));
  if (frames.rows() < f || frames.rows() % f != 0)
    throw AlignmentError("subsample: " + std::to_string(frames.rows()) +
                         " frames is not a positive multiple of " +
                         std::to_string(f));
  const auto [s1, s2] = subsample_strides(f);
  Matrix hidden = conv_k3(frames, w.conv1_w, w.conv1_b, s1).cwiseMax(0.0f);
  return conv_k3(hidden, w.conv2_w, w.conv2_b, s2);
}

void BankStack::push(int64_t segment_index, const Matrix &banks) {
  if (!entries_.empty() && segment_index <= entries_.back().segment)
    throw PreconditionError("memory banks must be pushed in segment order");
  if (capacity_ == 0) return;
  entries_.push_back({segment_index, banks});
  if (static_cast<int64_t>(entries_.size()) > capacity_) entries_.pop_front();
}

Matrix BankStack::layer(int64_t layer) const {
  if (entries_.empty()) return Matrix(0, 0);
  Matrix out(entries_.size(), entries_.front().banks.cols());
  for (size_t i = 0; i < entries_.size(); ++i)
    out.row(i) = entries_[i].banks.row(layer);
  return out;
}

std::vector<int64_t> BankStack::segment_indices() const {
  std::vector<int64_t> out;
  for (const auto &e : entries_) out.push_back(e.segment);
  return out;
}

SegmentEncoding encode_segment(const EncoderWeights &w, const SegmentPlan &plan,
                               const Matrix &segment_frames,
                               const BankStack &banks) {
  const int64_t f = w.config.subsample;
  for (const Span &s : plan.spans()) {
    if (s.length() % f != 0)
      throw AlignmentError("encode_segment: span of " +
                           std::to_string(s.length()) +
                           " frames is not divisible by " + std::to_string(f));
  }
  if (segment_frames.rows() != plan.total())
    throw PreconditionError("encode_segment: got " +
                            std::to_string(segment_frames.rows()) +
                            " frames for a segment of " +
                            std::to_string(plan.total()));

  Matrix tokens = subsample(w, segment_frames);
  SegmentEncoding enc;
  enc.banks.resize(w.config.layers, w.config.d_model);
  for (int64_t l = 0; l < w.config.layers; ++l) {
    RowVector bank;
    tokens = encoder_layer(w.layers[l], w.config, tokens, banks.layer(l), &bank);
    enc.banks.row(l) = bank;
  }
  tokens = layer_norm(tokens);
  const int64_t first = (plan.center.begin - plan.begin()) / f;
  enc.center = tokens.middleRows(first, plan.center.length() / f);
  return enc;
}

Matrix offline_encode(const EncoderWeights &w, const Matrix &frames,
                      const SegmentLayout &layout, bool shiftable_left) {
  if (frames.rows() == 0) throw EmptyInputError("offline_encode: no frames");
  if (layout.subsample != w.config.subsample)
    throw ConfigError("layout and encoder disagree on the subsampling factor");
  const auto plans = offline_plan(frames.rows(), layout, shiftable_left);
  const int64_t f = layout.subsample;
  Matrix out(frames.rows() / f, w.config.d_model);
  BankStack banks(w.config.banks);
  for (const auto &plan : plans) {
    const Matrix seg = frames.middleRows(plan.begin(), plan.total());
    SegmentEncoding enc = encode_segment(w, plan, seg, banks);
    out.middleRows(plan.center.begin / f, enc.center.rows()) = enc.center;
    banks.push(plan.index, enc.banks);
  }
  return out;
}

FrameBuffer::FrameBuffer(int64_t capacity, int64_t width)
    : capacity_(capacity), width_(width), data_(capacity * width) {}

void FrameBuffer::push(const Matrix &chunk) {
  if (chunk.cols() != width_)
    throw PreconditionError("frame width mismatch");
  for (Eigen::Index i = 0; i < chunk.rows(); ++i) {
    const int64_t slot = total_ % capacity_;
    std::memcpy(&data_[slot * width_], chunk.row(i).data(),
                sizeof(float) * width_);
    ++total_;
    size_ = std::min(size_ + 1, capacity_);
  }
}

Matrix FrameBuffer::slice(int64_t begin, int64_t end) const {
  if (begin < first_frame() || end > total_ || begin > end)
    throw PreconditionError("frames [" + std::to_string(begin) + ", " +
                            std::to_string(end) + ") not in buffer [" +
                            std::to_string(first_frame()) + ", " +
                            std::to_string(total_) + ")");
  Matrix out(end - begin, width_);
  for (int64_t i = begin; i < end; ++i)
    std::memcpy(out.row(i - begin).data(),
                &data_[(i % capacity_) * width_], sizeof(float) * width_);
  return out;
}

StreamingEncoder::StreamingEncoder(std::shared_ptr<const EncoderWeights> weights,
                                   const SegmentLayout &layout,
                                   ContextMode mode)
    : weights_(std::move(weights)),
      scheduler_(layout, mode),
      buffer_(layout.segment_size() + layout.center, weights_->config.input_dim),
      committed_(weights_->config.banks) {
  if (layout.subsample != weights_->config.subsample)
    throw ConfigError("layout and encoder disagree on the subsampling factor");
}

Eigen::Map<const Matrix> StreamingEncoder::step(const Matrix &chunk) {
  if (finished()) throw LifecycleError("stream_step called after finish");
  if (chunk.rows() != scheduler_.layout().chunk)
    throw PreconditionError("stream_step: chunk must hold " +
                            std::to_string(scheduler_.layout().chunk) +
                            " frames, got " + std::to_string(chunk.rows()));
  buffer_.push(chunk);
  run(scheduler_.advance());
  return outputs();
}

Eigen::Map<const Matrix> StreamingEncoder::finish() {
  run(scheduler_.finish());
  return outputs();
}

void StreamingEncoder::run(const SchedulerStep &step) {
  const auto start = std::chrono::steady_clock::now();
  const int64_t d = weights_->config.d_model;
  const int64_t f = scheduler_.layout().subsample;
  rows_ = scheduler_.frames_seen() / f;
  if (static_cast<int64_t>(outputs_.size()) < rows_ * d)
    outputs_.resize(rows_ * d);

  BankStack working = committed_;
  for (const SegmentPlan &plan : step.recompute) {
    const Matrix frames = buffer_.slice(plan.begin(), plan.end());
    SegmentEncoding enc = encode_segment(*weights_, plan, frames, working);
    std::memcpy(&outputs_[(plan.center.begin / f) * d], enc.center.data(),
                sizeof(float) * enc.center.size());
    working.push(plan.index, enc.banks);
    if (plan.finalized) committed_.push(plan.index, enc.banks);
  }

  last_step_.segments_encoded = static_cast<int64_t>(step.recompute.size());
  last_step_.newly_finalized = static_cast<int64_t>(step.newly_finalized.size());
  last_step_.encode_us = std::chrono::duration<double, std::micro>(
                             std::chrono::steady_clock::now() - start)
                             .count();
}

Eigen::Map<const Matrix> StreamingEncoder::outputs() const {
  return Eigen::Map<const Matrix>(outputs_.data(), rows_,
                                  weights_->config.d_model);
}

int64_t StreamingEncoder::provisional_row() const {
  const auto &trailing = scheduler_.trailing();
  if (trailing.empty()) return rows_;
  return trailing.front().center.begin / scheduler_.layout().subsample;
}

}  // namespace shiftctx
