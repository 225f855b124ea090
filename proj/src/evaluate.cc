/*
 * Copyright 2026 The rigdistill Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "rigdistill/evaluate.h"

#include <filesystem>
#include <sstream>

#include "binary_io.h"
#include "rigdistill/error.h"

namespace rigdistill {

EvalCorpus load_eval_corpus(const std::string& corpus_dir, const std::string& labels_path,
                            const std::string& geometry_path) {
  namespace fs = std::filesystem;
  std::vector<std::string> missing;
  if (!fs::is_directory(corpus_dir)) missing.push_back("corpus directory " + corpus_dir);
  if (!fs::is_regular_file(labels_path)) missing.push_back("labels " + labels_path);
  if (!fs::is_regular_file(geometry_path)) missing.push_back("geometry " + geometry_path);
  EvalCorpus corpus;
  if (missing.empty()) {
    corpus.labels = load_labels(labels_path);
    for (const auto& item : corpus.labels.items) {
      const fs::path tsv = fs::path(corpus_dir) / fs::path(item.path).replace_extension(".tsv");
      if (!fs::is_regular_file(tsv)) missing.push_back("intervals " + tsv.string());
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing evaluation artifacts:";
    for (const auto& m : missing) msg += " [" + m + "]";
    fail(ErrorKind::kIo, msg);
  }
  attach_audio(corpus.labels, corpus_dir);
  for (const auto& item : corpus.labels.items) {
    const fs::path tsv = fs::path(corpus_dir) / fs::path(item.path).replace_extension(".tsv");
    corpus.intervals.push_back(load_intervals(tsv.string()));
  }
  corpus.geometry = load_lip_geometry(geometry_path);
  return corpus;
}

EvalReport evaluate(const StudentNet& net, const EvalCorpus& corpus, const EvalOptions& options) {
  const auto& items = corpus.labels.items;
  if (items.empty()) fail(ErrorKind::kEmptyInput, "evaluation corpus has no tracks");
  if (corpus.intervals.size() != items.size()) {
    fail(ErrorKind::kInvalidArgument, "need one interval list per track");
  }
  corpus.geometry.validate();

  std::vector<double> timings;
  double sq_err = 0.0;
  std::size_t frames = 0;
  double jitter_sum = 0.0;
  std::size_t jitter_terms = 0;
  PbmCount pbm;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (!item.audio) fail(ErrorKind::kInvalidArgument, "track " + item.path + " has no audio");
    StreamEngine engine(net, options.stream);
    const auto& samples = item.audio->samples;
    // push in 20 ms chunks, draining as frames become ready
    RigSequence out;
    const std::size_t chunk = 320;
    std::size_t pos = 0;
    while (pos < samples.size()) {
      const std::size_t n = std::min(chunk, samples.size() - pos);
      pos += engine.push_audio(std::span<const float>(samples).subspan(pos, n));
      while (auto f = engine.next_frame()) out.push_back(f->rig);
    }
    engine.finish();
    while (auto f = engine.next_frame()) out.push_back(f->rig);
    timings.insert(timings.end(), engine.inference_ms().begin(), engine.inference_ms().end());

    if (out.size() != item.frames.size()) {
      fail(ErrorKind::kInvalidArgument, "track " + item.path + ": label frame count differs");
    }
    sq_err += rig_mse(out, item.frames) * static_cast<double>(out.size());
    frames += out.size();
    if (out.size() >= 3) {
      jitter_sum += jitter(out, corpus.geometry) * static_cast<double>(out.size() - 2);
      jitter_terms += out.size() - 2;
    }
    const PbmCount c = pbm_count(out, corpus.intervals[i], corpus.geometry, options.threshold,
                                 options.tolerance_frames);
    pbm.hits += c.hits;
    pbm.frames += c.frames;
  }
  if (pbm.frames == 0) fail(ErrorKind::kNoPbmFrames, "no p/b/m frames in the evaluation corpus");
  if (jitter_terms == 0) fail(ErrorKind::kInvalidArgument, "jitter needs a track of >= 3 frames");
  if (frames < 100) {
    fail(ErrorKind::kTooFewFrames, "latency needs >= 100 frames, corpus has " +
                                       std::to_string(frames));
  }

  EvalReport r;
  r.model = options.model;
  r.channels = net.config().channels;
  r.future_ms = net.config().future_ms;
  r.mode = options.stream.ensemble ? "ensemble" : "plain";
  r.mse = sq_err / static_cast<double>(frames);
  r.pbm_accuracy = 100.0 * static_cast<double>(pbm.hits) / static_cast<double>(pbm.frames);
  r.jitter = jitter_sum / static_cast<double>(jitter_terms);
  r.resources = net.count_resources();
  r.latency = make_latency_report(net.config().future_ms, options.stream.ensemble, timings);
  return r;
}

std::string eval_csv_header() {
  return "model,channels,future_ms,mode,mse,pbm_accuracy,jitter,param_count,mac_count,"
         "peak_memory_bytes,future_context_ms,smoothing_ms,inference_ms_p50,inference_ms_p95,"
         "total_latency_ms";
}

std::string eval_csv_row(const EvalReport& r) {
  std::ostringstream os;
  os.precision(9);
  os << r.model << ',' << r.channels << ',' << r.future_ms << ',' << r.mode << ',' << r.mse << ','
     << r.pbm_accuracy << ',' << r.jitter << ',' << r.resources.param_count << ','
     << r.resources.mac_count << ',' << r.resources.peak_memory_bytes << ','
     << r.latency.future_context_ms << ',' << r.latency.smoothing_ms << ','
     << r.latency.inference_ms_p50 << ',' << r.latency.inference_ms_p95 << ','
     << r.latency.total_ms;
  return os.str();
}

void write_eval_csv(const std::vector<EvalReport>& reports, const std::string& path) {
  std::string text = eval_csv_header() + "\n";
  for (const auto& r : reports) text += eval_csv_row(r) + "\n";
  io::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace rigdistill
