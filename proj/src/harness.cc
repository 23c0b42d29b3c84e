// harness.cc

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

#include "shiftctx/harness.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "shiftctx/error.h"

namespace shiftctx {

namespace {

int64_t parse_int(const std::string &key, const std::string &value) {
  int64_t out = 0;
  const char *end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("'" + key + "' expects an integer, got '" + value + "'");
  return out;
}

uint64_t parse_u64(const std::string &key, const std::string &value) {
  uint64_t out = 0;
  const char *end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("'" + key + "' expects an unsigned integer, got '" +
                      value + "'");
  return out;
}

double parse_double(const std::string &key, const std::string &value) {
  try {
    size_t used = 0;
    const double out = std::stod(value, &used);
    if (used == value.size()) return out;
  } catch (const std::exception &) {
  }
  throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
}

std::string trim(const std::string &s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename Fn>
void parallel_for(int64_t count, int64_t threads, Fn &&fn) {
  if (threads <= 0)
    threads = std::max<int64_t>(1, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  std::atomic<int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int64_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int64_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto &t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Matrix pad_to_chunks(const Matrix &frames, int64_t chunk) {
  const int64_t rows = (frames.rows() + chunk - 1) / chunk * chunk;
  Matrix out = Matrix::Zero(rows, frames.cols());
  out.topRows(frames.rows()) = frames;
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  return v[mid];
}

}  // namespace

const std::vector<std::string> &RunConfig::keys() {
  static const std::vector<std::string> k = {
      "left",       "center",      "right",      "chunk",       "subsample",
      "mode",       "wait-k",      "pre-decision", "banks",     "clip",
      "frame-ms",   "compute",     "seed",       "input-dim",   "d-model",
      "layers",     "heads",       "ffn-dim",    "dec-d-model", "dec-layers",
      "dec-heads",  "dec-ffn-dim", "vocab",      "max-len",     "corpus",
      "out",        "threads",     "synthetic",  "synthetic-frames"};
  return k;
}

void RunConfig::set(const std::string &key, const std::string &value) {
  auto i = [&] { return parse_int(key, value); };
  if (key == "left") layout.left = i();
  else if (key == "center") layout.center = i();
  else if (key == "right") layout.right = i();
  else if (key == "chunk") layout.chunk = i();
  else if (key == "subsample") layout.subsample = encoder.subsample = i();
  else if (key == "mode") mode = parse_context_mode(value);
  else if (key == "wait-k") decoder.wait_k = i();
  else if (key == "pre-decision") decoder.pre_decision = i();
  else if (key == "banks") encoder.banks = i();
  else if (key == "clip") encoder.clip = i();
  else if (key == "frame-ms") frame_ms = parse_double(key, value);
  else if (key == "compute") compute = ComputeModel::parse(value);
  else if (key == "seed") {
    encoder.seed = parse_u64(key, value);
    decoder.seed = encoder.seed + 1;
  }
  else if (key == "input-dim") encoder.input_dim = i();
  else if (key == "d-model") encoder.d_model = i();
  else if (key == "layers") encoder.layers = i();
  else if (key == "heads") encoder.heads = i();
  else if (key == "ffn-dim") encoder.ffn_dim = i();
  else if (key == "dec-d-model") decoder.d_model = i();
  else if (key == "dec-layers") decoder.layers = i();
  else if (key == "dec-heads") decoder.heads = i();
  else if (key == "dec-ffn-dim") decoder.ffn_dim = i();
  else if (key == "vocab") decoder.vocab = i();
  else if (key == "max-len") decoder.max_len = i();
  else if (key == "corpus") corpus = value;
  else if (key == "out") out_dir = value;
  else if (key == "threads") threads = i();
  else if (key == "synthetic") synthetic = i();
  else if (key == "synthetic-frames") synthetic_frames = i();
  else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  layout.validate();
  encoder.validate();
  decoder.validate();
  if (encoder.subsample != layout.subsample)
    throw ConfigError("encoder and layout subsampling factors differ");
  const int64_t unit = decoder.pre_decision * layout.subsample;
  if (unit % layout.chunk != 0)
    throw ConfigError("pre-decision x subsample (" + std::to_string(unit) +
                      ") must be a multiple of chunk (" +
                      std::to_string(layout.chunk) + ")");
  if (!(frame_ms > 0)) throw ConfigError("frame-ms must be positive");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (synthetic < 0) throw ConfigError("synthetic must be >= 0");
  if (synthetic_frames < 1) throw ConfigError("synthetic-frames must be >= 1");
}

void apply_config_text(const std::string &text, RunConfig *config) {
  std::istringstream is(text);
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value");
    try {
      config->set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError &e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
}

void apply_config_file(const std::string &path, RunConfig *config) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  apply_config_text(ss.str(), config);
}

Matrix synthetic_frames(int64_t length, int64_t width, uint64_t seed) {
  WeightRng rng(seed);
  return rng.uniform_matrix(length, width, 1.0f);
}

std::vector<CorpusRecord> parse_corpus(const std::string &text) {
  std::vector<CorpusRecord> records;
  std::istringstream is(text);
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    if (trim(line).empty()) continue;
    auto fail = [&](const std::string &what) {
      throw DataError("corpus line " + std::to_string(lineno) + ": " + what);
    };
    CorpusRecord rec;
    try {
      const auto j = nlohmann::json::parse(line);
      rec.id = j.at("id").get<std::string>();
      if (j.contains("reference") && !j.at("reference").is_null())
        rec.reference = j.at("reference").get<std::string>();
      const auto &src = j.at("source");
      const int forms = src.contains("synthetic") + src.contains("frames") +
                        src.contains("file");
      if (forms != 1 || src.size() != 1)
        fail("source must have exactly one of synthetic, frames, file");
      if (src.contains("synthetic")) {
        const auto &s = src.at("synthetic");
        SyntheticSource syn{s.at("length").get<int64_t>(),
                            s.at("seed").get<uint64_t>()};
        if (syn.length < 1) fail("synthetic length must be >= 1");
        rec.source = syn;
      } else if (src.contains("frames")) {
        const auto rows = src.at("frames").get<std::vector<std::vector<float>>>();
        if (rows.empty()) fail("empty frame matrix");
        Matrix m(rows.size(), rows[0].size());
        for (size_t r = 0; r < rows.size(); ++r) {
          if (rows[r].size() != rows[0].size()) fail("ragged frame matrix");
          for (size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
        }
        rec.source = std::move(m);
      } else {
        rec.source = FileSource{src.at("file").get<std::string>()};
      }
    } catch (const nlohmann::json::exception &e) {
      fail(e.what());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<CorpusRecord> load_corpus(const std::string &path) {
  return parse_corpus(read_file(path));
}

Matrix load_source(const CorpusRecord &record, int64_t width,
                   const std::string &base_dir) {
  Matrix frames;
  if (const auto *syn = std::get_if<SyntheticSource>(&record.source)) {
    frames = synthetic_frames(syn->length, width, syn->seed);
  } else if (const auto *m = std::get_if<Matrix>(&record.source)) {
    frames = *m;
  } else {
    const auto &file = std::get<FileSource>(record.source);
    std::filesystem::path p(file.path);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    std::ifstream is(p);
    if (!is) throw DataError(record.id + ": cannot read " + p.string());
    std::vector<float> values;
    int64_t rows = 0;
    std::string line;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      int64_t cols = 0;
      for (float v; ls >> v; ++cols) values.push_back(v);
      if (!ls.eof())
        throw DataError(record.id + ": non-numeric value in " + p.string());
      if (cols == 0) continue;
      if (cols != width)
        throw DataError(record.id + ": frame " + std::to_string(rows + 1) +
                        " has " + std::to_string(cols) + " values, expected " +
                        std::to_string(width));
      ++rows;
    }
    frames = Eigen::Map<Matrix>(values.data(), rows, width);
  }
  if (frames.rows() == 0) throw DataError(record.id + ": empty source");
  if (frames.cols() != width)
    throw DataError(record.id + ": frames have " +
                    std::to_string(frames.cols()) + " features, expected " +
                    std::to_string(width));
  return frames;
}

std::vector<CorpusRecord> synthetic_corpus(int64_t count, int64_t frames,
                                           uint64_t seed) {
  std::vector<CorpusRecord> records;
  for (int64_t i = 0; i < count; ++i) {
    std::ostringstream id;
    id << "syn-" << std::setw(4) << std::setfill('0') << i;
    records.push_back(
        {id.str(), SyntheticSource{frames, seed * 1000003 + i}, std::nullopt});
  }
  return records;
}

std::vector<CorpusRecord> corpus_for(const RunConfig &config) {
  if (!config.corpus.empty()) return load_corpus(config.corpus);
  if (config.synthetic > 0)
    return synthetic_corpus(config.synthetic, config.synthetic_frames,
                            config.encoder.seed);
  throw ConfigError("no corpus given (set corpus or synthetic)");
}

std::map<std::string, std::string> references_of(
    const std::vector<CorpusRecord> &records) {
  std::map<std::string, std::string> refs;
  for (const auto &r : records)
    if (r.reference) refs[r.id] = *r.reference;
  return refs;
}

Models build_models(const RunConfig &config) {
  config.validate();
  auto enc = std::make_shared<EncoderWeights>(
      EncoderWeights::random(config.encoder));
  auto dec = std::make_shared<DecoderWeights>(
      DecoderWeights::random(config.decoder, config.encoder.d_model));
  return {enc, dec};
}

std::vector<InstanceTrace> run_simulation(const RunConfig &config,
                                          const std::vector<CorpusRecord> &records,
                                          const std::string &base_dir) {
  const Models models = build_models(config);
  std::vector<InstanceTrace> traces(records.size());
  parallel_for(static_cast<int64_t>(records.size()), config.threads,
               [&](int64_t i) {
                 const Matrix frames = load_source(
                     records[i], config.encoder.input_dim, base_dir);
                 traces[i] = translate_stream(
                     records[i].id, frames, models.encoder, models.decoder,
                     config.layout, config.mode, config.compute,
                     config.frame_ms);
               });
  std::sort(traces.begin(), traces.end(),
            [](const auto &a, const auto &b) { return a.id < b.id; });
  return traces;
}

std::string traces_to_jsonl(const std::vector<InstanceTrace> &traces) {
  std::string out;
  for (const auto &t : traces) out += trace_to_json(t).dump() + "\n";
  return out;
}

std::vector<InstanceTrace> parse_traces(const std::string &jsonl) {
  std::vector<InstanceTrace> traces;
  std::istringstream is(jsonl);
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    if (trim(line).empty()) continue;
    try {
      traces.push_back(trace_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception &e) {
      throw DataError("trace line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError &e) {
      throw DataError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return traces;
}

void write_outputs(const std::string &dir,
                   const std::vector<InstanceTrace> &traces,
                   const MetricsSummary &summary) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_file((base / "traces.jsonl").string(), traces_to_jsonl(traces));
  write_file((base / "summary.json").string(),
             summary_to_json(summary).dump(2) + "\n");
  write_file((base / "metrics.csv").string(), summary_to_csv(summary));
}

std::vector<std::string> trace_listing(const SegmentLayout &layout,
                                       ContextMode mode, int64_t chunks,
                                       double frame_ms) {
  SegmentScheduler scheduler(layout, mode);
  std::vector<std::string> lines;
  for (int64_t i = 0; i < chunks; ++i) {
    scheduler.advance();
    std::ostringstream line;
    line << "t=" << static_cast<double>(scheduler.frames_seen()) * frame_ms;
    for (const auto &plan : scheduler.plans()) line << " | " << format_plan(plan);
    lines.push_back(line.str());
  }
  return lines;
}

double StreamConsistency::max_provisional_deviation() const {
  double worst = 0.0;
  for (double d : provisional_deviation) worst = std::max(worst, d);
  return worst;
}

int64_t StreamConsistency::max_recompute() const {
  int64_t worst = 0;
  for (int64_t c : recompute_counts) worst = std::max(worst, c);
  return worst;
}

StreamConsistency measure_consistency(
    std::shared_ptr<const EncoderWeights> weights, const Matrix &frames,
    const SegmentLayout &layout, ContextMode mode) {
  const Matrix source = pad_to_chunks(frames, layout.chunk);
  StreamingEncoder enc(weights, layout, mode);
  StreamConsistency report;
  std::vector<std::pair<int64_t, Matrix>> provisional;
  for (int64_t i = 0; i < source.rows() / layout.chunk; ++i) {
    auto out = enc.step(source.middleRows(i * layout.chunk, layout.chunk));
    const int64_t row = enc.provisional_row();
    provisional.emplace_back(row, out.bottomRows(out.rows() - row));
    report.recompute_counts.push_back(enc.last_step().segments_encoded);
    report.encode_us.push_back(enc.last_step().encode_us);
  }
  const Matrix streamed = enc.finish();
  const Matrix offline = offline_encode(*weights, source, layout,
                                        mode == ContextMode::kShiftable);
  report.final_deviation = relative_deviation(streamed, offline);
  for (const auto &[row, m] : provisional) {
    report.provisional_deviation.push_back(
        m.rows() == 0 ? 0.0
                      : relative_deviation(m, streamed.middleRows(row, m.rows())));
  }
  return report;
}

double cost_growth_ratio(const std::vector<double> &cost) {
  const size_t n = cost.size();
  if (n < 2) return 1.0;
  // Theil-Sen slope, in cost units per step.
  std::vector<double> slopes;
  slopes.reserve(n * (n - 1) / 2);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      slopes.push_back((cost[j] - cost[i]) / static_cast<double>(j - i));
  const double level = median(cost);
  if (level <= 0) return 1.0;
  return 1.0 + median(slopes) * static_cast<double>(n - 1) / level;
}

std::vector<double> per_segment_us(const StreamConsistency &run) {
  std::vector<double> out;
  for (size_t i = 0; i < run.encode_us.size(); ++i)
    if (run.recompute_counts[i] > 0)
      out.push_back(run.encode_us[i] / run.recompute_counts[i]);
  return out;
}

int64_t recompute_bound(const SegmentLayout &layout) {
  return (layout.left + layout.right + layout.center - 1) / layout.center + 1;
}

nlohmann::json consistency_report(const RunConfig &config,
                                  const std::vector<CorpusRecord> &records,
                                  const std::string &base_dir) {
  config.validate();
  auto weights = std::make_shared<const EncoderWeights>(
      EncoderWeights::random(config.encoder));
  nlohmann::json per_record = nlohmann::json::array();
  double worst_shift_final = 0.0, worst_base_final = 0.0;
  double weakest_base_mismatch = -1.0, worst_growth = 0.0;
  int64_t worst_recompute = 0;
  for (const auto &rec : records) {
    const Matrix frames = load_source(rec, config.encoder.input_dim, base_dir);
    nlohmann::json entry = {{"id", rec.id}};
    for (auto mode : {ContextMode::kBaseline, ContextMode::kShiftable}) {
      const auto r = measure_consistency(weights, frames, config.layout, mode);
      const double growth = cost_growth_ratio(per_segment_us(r));
      entry[to_string(mode)] = {
          {"final_deviation", r.final_deviation},
          {"max_provisional_deviation", r.max_provisional_deviation()},
          {"max_recompute", r.max_recompute()},
          {"cost_growth_ratio", growth},
          {"provisional_deviation", r.provisional_deviation},
          {"recompute_counts", r.recompute_counts},
          {"encode_us", r.encode_us},
      };
      worst_recompute = std::max(worst_recompute, r.max_recompute());
      worst_growth = std::max(worst_growth, growth);
      if (mode == ContextMode::kShiftable) {
        worst_shift_final = std::max(worst_shift_final, r.final_deviation);
      } else {
        worst_base_final = std::max(worst_base_final, r.final_deviation);
        const double m = r.max_provisional_deviation();
        weakest_base_mismatch =
            weakest_base_mismatch < 0 ? m : std::min(weakest_base_mismatch, m);
      }
    }
    per_record.push_back(std::move(entry));
  }
  return {
      {"records", per_record},
      {"aggregate",
       {{"shiftable_max_final_deviation", worst_shift_final},
        {"baseline_max_final_deviation", worst_base_final},
        {"baseline_min_max_provisional_deviation",
         std::max(weakest_base_mismatch, 0.0)},
        {"max_recompute", worst_recompute},
        {"recompute_bound", recompute_bound(config.layout)},
        {"max_cost_growth_ratio", worst_growth}}},
  };
}

std::string read_file(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const std::string &path, const std::string &contents) {
  std::ofstream os(path, std::ios::binary);
  if (!os || !(os << contents)) throw DataError("cannot write " + path);
}

}  // namespace shiftctx
