// shiftctx.cc

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

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shiftctx/error.h"
#include "shiftctx/harness.h"

namespace {

using namespace shiftctx;

struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;

  void attach(CLI::App *cmd) {
    cmd->add_option("--config", file, "key=value config file");
    for (const auto &key : RunConfig::keys())
      cmd->add_option("--" + key, values[key]);
  }

  RunConfig build() const {
    RunConfig config;
    if (!file.empty()) apply_config_file(file, &config);
    for (const auto &[key, value] : values)
      if (!value.empty()) config.set(key, value);
    config.validate();
    return config;
  }
};

std::string corpus_dir(const RunConfig &config) {
  if (config.corpus.empty()) return ".";
  const auto parent = std::filesystem::path(config.corpus).parent_path();
  return parent.empty() ? "." : parent.string();
}

std::vector<std::string> read_lines(const std::string &path) {
  std::istringstream is(read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  return lines;
}

int cmd_trace(const RunConfig &config, int64_t chunks, bool last_only) {
  if (chunks < 1) throw ConfigError("--chunks must be >= 1");
  const auto lines =
      trace_listing(config.layout, config.mode, chunks, config.frame_ms);
  if (last_only) {
    std::cout << lines.back() << "\n";
  } else {
    for (const auto &line : lines) std::cout << line << "\n";
  }
  return 0;
}

MetricsSummary simulate_into(const RunConfig &config,
                             const std::vector<CorpusRecord> &records,
                             const std::string &out) {
  const auto traces = run_simulation(config, records, corpus_dir(config));
  const auto summary = summarize(traces, references_of(records));
  write_outputs(out, traces, summary);
  return summary;
}

int cmd_simulate(RunConfig config, bool compare) {
  const auto records = corpus_for(config);
  if (!compare) {
    const auto summary = simulate_into(config, records, config.out_dir);
    std::cout << summary_to_json(summary)["corpus"].dump() << "\n";
    return 0;
  }
  std::map<ContextMode, MetricsSummary> runs;
  for (auto mode : {ContextMode::kBaseline, ContextMode::kShiftable}) {
    config.mode = mode;
    const auto dir = std::filesystem::path(config.out_dir) / to_string(mode);
    runs[mode] = simulate_into(config, records, dir.string());
    std::cout << to_string(mode) << " "
              << summary_to_json(runs[mode])["corpus"].dump() << "\n";
  }
  std::printf("delta_AL_ca_ms=%.6f\n",
              runs[ContextMode::kShiftable].mean_al_ca -
                  runs[ContextMode::kBaseline].mean_al_ca);
  return 0;
}

int cmd_replay(const std::string &traces_path, const std::string &refs_path,
               const std::string &out) {
  const auto traces = parse_traces(read_file(traces_path));
  std::map<std::string, std::string> refs;
  if (!refs_path.empty()) refs = references_of(load_corpus(refs_path));
  const auto summary = summarize(traces, refs);
  if (out.empty()) {
    std::cout << summary_to_json(summary).dump(2) << "\n";
  } else {
    std::filesystem::create_directories(out);
    const std::filesystem::path base(out);
    write_file((base / "summary.json").string(),
               summary_to_json(summary).dump(2) + "\n");
    write_file((base / "metrics.csv").string(), summary_to_csv(summary));
    std::cout << summary_to_json(summary)["corpus"].dump() << "\n";
  }
  return 0;
}

int cmd_consistency(const RunConfig &config, const std::string &report_path,
                    const std::string &weights_path) {
  if (!weights_path.empty())
    EncoderWeights::random(config.encoder).save(weights_path);
  const auto records = corpus_for(config);
  const auto report = consistency_report(config, records, corpus_dir(config));
  if (!report_path.empty()) write_file(report_path, report.dump(2) + "\n");
  std::cout << report["aggregate"].dump(2) << "\n";
  return 0;
}

int cmd_bleu(const std::string &hyp_path, const std::string &ref_path,
             const std::string &smooth, bool sentence) {
  Smoothing smoothing;
  if (smooth == "exp") smoothing = Smoothing::kExp;
  else if (smooth == "none") smoothing = Smoothing::kNone;
  else throw ConfigError("--smooth must be none or exp");
  const auto hyps = read_lines(hyp_path);
  const auto refs = read_lines(ref_path);
  if (hyps.size() != refs.size())
    throw DataError("hypothesis and reference line counts differ (" +
                    std::to_string(hyps.size()) + " vs " +
                    std::to_string(refs.size()) + ")");
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>
      pairs;
  for (size_t i = 0; i < hyps.size(); ++i) {
    pairs.emplace_back(tokenize(hyps[i]), tokenize(refs[i]));
    if (sentence)
      std::printf("%.6f\n",
                  sentence_bleu(pairs.back().first, pairs.back().second,
                                smoothing));
  }
  if (!sentence) std::printf("BLEU=%.6f\n", corpus_bleu(pairs));
  return 0;
}

int cmd_al(const std::string &delays, int64_t source_len, double token_ms,
           int64_t ref_len) {
  LatencyInput in;
  std::istringstream is(delays);
  for (std::string item; std::getline(is, item, ',');) {
    try {
      size_t used = 0;
      in.delays_ms.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception &) {
      throw ConfigError("bad delay value '" + item + "'");
    }
  }
  in.source_tokens = source_len;
  in.token_ms = token_ms;
  in.reference_len = ref_len > 0 ? ref_len : in.delays_ms.size();
  const auto r = average_lagging(in);
  std::printf("AL=%.6f tau=%lld flagged=%d\n", r.al_ms,
              static_cast<long long>(r.tau), r.tau_flagged ? 1 : 0);
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Shiftable-context streaming translation harness"};
  app.require_subcommand(1);

  auto *trace = app.add_subcommand("trace", "print segment plans per chunk");
  ConfigFlags trace_flags;
  trace_flags.attach(trace);
  int64_t chunks = 5;
  bool last_only = false;
  trace->add_option("--chunks", chunks, "number of chunk arrivals");
  trace->add_flag("--last", last_only, "print only the final step");

  auto *simulate = app.add_subcommand("simulate", "run the wait-k pipeline");
  ConfigFlags sim_flags;
  sim_flags.attach(simulate);
  bool compare = false;
  simulate->add_flag("--compare", compare,
                     "run baseline and shiftable into <out>/<mode>");

  auto *replay = app.add_subcommand("replay", "recompute metrics from traces");
  std::string traces_path, refs_path, replay_out;
  replay->add_option("--traces", traces_path)->required();
  replay->add_option("--refs", refs_path, "corpus file with references");
  replay->add_option("--out", replay_out);

  auto *consistency =
      app.add_subcommand("consistency", "streaming vs offline mismatch report");
  ConfigFlags cons_flags;
  cons_flags.attach(consistency);
  std::string report_path, weights_path;
  consistency->add_option("--report", report_path, "write the full report");
  consistency->add_option("--dump-weights", weights_path,
                          "save the encoder weights used");

  auto *bleu = app.add_subcommand("bleu", "BLEU over line-aligned files");
  std::string hyp_path, ref_path, smooth = "exp";
  bool sentence = false;
  bleu->add_option("--hyp", hyp_path)->required();
  bleu->add_option("--ref", ref_path)->required();
  bleu->add_option("--smooth", smooth, "none|exp (sentence level)");
  bleu->add_flag("--sentence", sentence, "per-line sentence scores");

  auto *al = app.add_subcommand("al", "average lagging of one delay list");
  std::string delays;
  int64_t source_len = 0, ref_len = 0;
  double token_ms = 10.0;
  al->add_option("--delays", delays, "comma separated ms")->required();
  al->add_option("--source-len", source_len)->required();
  al->add_option("--token-ms", token_ms);
  al->add_option("--ref-len", ref_len, "defaults to the delay count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*trace) return cmd_trace(trace_flags.build(), chunks, last_only);
    if (*simulate) return cmd_simulate(sim_flags.build(), compare);
    if (*replay) return cmd_replay(traces_path, refs_path, replay_out);
    if (*consistency)
      return cmd_consistency(cons_flags.build(), report_path, weights_path);
    if (*bleu) return cmd_bleu(hyp_path, ref_path, smooth, sentence);
    if (*al) return cmd_al(delays, source_len, token_ms, ref_len);
  } catch (const ConfigError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
