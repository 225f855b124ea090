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

#include "rigdistill/cli.h"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "binary_io.h"
#include "rigdistill/audio.h"
#include "rigdistill/checkpoint.h"
#include "rigdistill/error.h"
#include "rigdistill/evaluate.h"
#include "rigdistill/gradcheck.h"
#include "rigdistill/metrics.h"
#include "rigdistill/realtime.h"
#include "rigdistill/student_net.h"
#include "rigdistill/teacher.h"
#include "rigdistill/trainer.h"

namespace rigdistill {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void invalid(const std::string& msg) { fail(ErrorKind::kValidation, msg); }

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

void error_line(std::ostream& err, const std::string& kind, const std::string& msg) {
  err << "error kind=" << kind << " message=" << quote(msg) << '\n';
}

// Everything a run can be configured with, after defaults and overrides.
struct RunConfig {
  StudentConfig model;
  TrainConfig train;
  std::uint64_t teacher_seed = 0;
  bool lr_set = false;
  bool epochs_set = false;
};

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) invalid("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) invalid("config: unknown key '" + where + "." + key + "'");
  }
}

double get_number(const json& obj, const std::string& where, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number()) invalid("config: '" + where + "." + key + "' must be a number");
  return v.get<double>();
}

std::int64_t get_integer(const json& obj, const std::string& where, const char* key,
                         std::int64_t min) {
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < min) {
    invalid("config: '" + where + "." + key + "' must be an integer >= " + std::to_string(min));
  }
  return v.get<std::int64_t>();
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  if (!fs::is_regular_file(path)) invalid("config file not found: " + path);
  const auto bytes = io::read_file(path);
  json root;
  try {
    root = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    invalid(std::string("config: ") + e.what());
  }
  check_keys(root, "", {"model", "train", "loss", "teacher"});
  if (root.contains("model")) {
    const json& m = root["model"];
    check_keys(m, "model", {"channels", "future_ms", "seed"});
    if (m.contains("channels")) cfg.model.channels = get_integer(m, "model", "channels", 1);
    if (m.contains("future_ms")) {
      cfg.model.future_ms = static_cast<int>(get_integer(m, "model", "future_ms", 0));
    }
    if (m.contains("seed")) cfg.model.seed = get_integer(m, "model", "seed", 0);
  }
  if (root.contains("train")) {
    const json& t = root["train"];
    check_keys(t, "train", {"learning_rate", "epochs", "batch_frames", "subset_count", "seed"});
    if (t.contains("learning_rate")) {
      cfg.train.learning_rate = get_number(t, "train", "learning_rate");
      cfg.lr_set = true;
    }
    if (t.contains("epochs")) {
      cfg.train.epochs = static_cast<int>(get_integer(t, "train", "epochs", 0));
      cfg.epochs_set = true;
    }
    if (t.contains("batch_frames")) {
      cfg.train.batch_frames = get_integer(t, "train", "batch_frames", 0);
    }
    if (t.contains("subset_count")) {
      cfg.train.subset_count = get_integer(t, "train", "subset_count", 0);
    }
    if (t.contains("seed")) cfg.train.seed = get_integer(t, "train", "seed", 0);
  }
  if (root.contains("loss")) {
    const json& l = root["loss"];
    check_keys(l, "loss", {"alpha_rec", "alpha_vel", "alpha_feat"});
    if (l.contains("alpha_rec")) cfg.train.weights.alpha_rec = get_number(l, "loss", "alpha_rec");
    if (l.contains("alpha_vel")) cfg.train.weights.alpha_vel = get_number(l, "loss", "alpha_vel");
    if (l.contains("alpha_feat")) {
      cfg.train.weights.alpha_feat = get_number(l, "loss", "alpha_feat");
    }
  }
  if (root.contains("teacher")) {
    const json& t = root["teacher"];
    check_keys(t, "teacher", {"seed"});
    if (t.contains("seed")) cfg.teacher_seed = get_integer(t, "teacher", "seed", 0);
  }
  return cfg;
}

json config_json(const RunConfig& c) {
  return json{{"model",
               {{"channels", c.model.channels},
                {"future_ms", c.model.future_ms},
                {"seed", c.model.seed}}},
              {"train",
               {{"learning_rate", c.train.learning_rate},
                {"epochs", c.train.epochs},
                {"batch_frames", c.train.batch_frames},
                {"subset_count", c.train.subset_count},
                {"seed", c.train.seed},
                {"mode", to_string(c.train.mode)}}},
              {"loss",
               {{"alpha_rec", c.train.weights.alpha_rec},
                {"alpha_vel", c.train.weights.alpha_vel},
                {"alpha_feat", c.train.weights.alpha_feat}}},
              {"teacher", {{"seed", c.teacher_seed}}}};
}

// Re-throws library argument checks as validation failures.
template <typename F>
void validate_with(F&& check) {
  try {
    check();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kValidation) throw;
    invalid(e.what());
  }
}

EnsembleWeights parse_alphas(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      invalid("--alphas: '" + part + "' is not a number");
    }
  }
  if (values.size() != 3) invalid("--alphas needs exactly three comma separated values");
  const EnsembleWeights w{values[0], values[1], values[2]};
  validate_with([&] { validate_ensemble_weights(w); });
  return w;
}

void apply_threads() {
  const char* env = std::getenv("RIGDISTILL_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 4096) {
    invalid(std::string("RIGDISTILL_THREADS must be a positive integer, got '") + env + "'");
  }
  omp_set_num_threads(static_cast<int>(n));
}

struct Manifest {
  std::string subcommand;
  std::vector<std::string> argv;
  std::string config_path;
  json inputs = json::object();
  json outputs = json::object();
  json resolved = json::object();
  std::optional<std::uint64_t> seed;

  void write(const std::string& out_path) const {
    json j{{"subcommand", subcommand},
           {"argv", argv},
           {"config_path", config_path},
           {"inputs", inputs},
           {"outputs", outputs},
           {"resolved", resolved}};
    j["seed"] = seed ? json(*seed) : json(nullptr);
    const std::string text = j.dump(2) + "\n";
    io::write_file(out_path + ".manifest.json",
                   std::vector<std::uint8_t>(text.begin(), text.end()));
  }
};

void write_text(const std::string& path, const std::string& text) {
  io::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::optional<OpKind> parse_op(const std::string& name) {
  if (name.empty()) return std::nullopt;
  for (int k = 0; k <= static_cast<int>(OpKind::kWeightedSum); ++k) {
    const auto kind = static_cast<OpKind>(k);
    if (name == to_string(kind)) return kind;
  }
  invalid("--corrupt: unknown op '" + name + "'");
}

struct Args {
  std::string config;
  std::string out;
  std::string corpus;
  std::string labels;
  std::string s0;
  std::string init;
  std::string checkpoint;
  std::string geometry;
  std::string alphas;
  std::string model_name;
  std::string corrupt;
  std::uint64_t seed = 0;
  std::size_t channels = 0;
  int future_ms = 0;
  double threshold = kPbmThreshold;
  bool ensemble = false;
  std::size_t tracks = 3;
  double seconds = 2.0;
  std::size_t gc_seeds = 100;
  std::size_t gc_size = 32;
  std::size_t gc_network_seeds = 100;
};

class Cli {
 public:
  Cli(int argc, const char* const* argv, std::istream& in, std::ostream& out)
      : in_(in), out_(out), argc_(argc), raw_argv_(argv) {
    for (int i = 0; i < argc; ++i) argv_.emplace_back(argv[i]);
  }

  int run(CLI::App& app, std::ostream& err);

 private:
  CLI::App* add(CLI::App& app, const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    subs_[name] = sub;
    return sub;
  }
  bool given(const std::string& sub, const std::string& flag) const {
    return subs_.at(sub)->count(flag) > 0;
  }
  void add_model_flags(CLI::App* sub) {
    sub->add_option("--config", args_.config, "JSON config")->check(CLI::ExistingFile);
    sub->add_option("--seed", args_.seed, "seed for model init and batch order");
    sub->add_option("--channels", args_.channels, "channel width C")->check(CLI::PositiveNumber);
    sub->add_option("--future-ms", args_.future_ms, "future context d in ms")
        ->check(CLI::Range(0, kWindowMs));
  }
  RunConfig resolve(const std::string& sub) const;
  Manifest manifest(const std::string& sub) const {
    Manifest m;
    m.subcommand = sub;
    m.argv = argv_;
    m.config_path = args_.config;
    return m;
  }
  PseudoLabelDataset dataset() const {
    PseudoLabelDataset ds = load_labels(args_.labels);
    attach_audio(ds, args_.corpus);
    return ds;
  }
  void report_training(const std::string& sub, const TrainReport& r);
  void train(const std::string& sub, TrainMode mode);
  void synth_corpus();
  void pseudolabel();
  void evaluate_cmd();
  void account();
  int gradcheck(std::ostream& err);
  void stream();

  std::istream& in_;
  std::ostream& out_;
  int argc_;
  const char* const* raw_argv_;
  std::vector<std::string> argv_;
  Args args_;
  std::map<std::string, CLI::App*> subs_;
};

RunConfig Cli::resolve(const std::string& sub) const {
  RunConfig cfg = load_config(args_.config);
  if (given(sub, "--seed")) {
    cfg.model.seed = args_.seed;
    cfg.train.seed = args_.seed;
    cfg.teacher_seed = args_.seed;
  }
  if (subs_.at(sub)->get_option_no_throw("--channels") && given(sub, "--channels")) {
    cfg.model.channels = args_.channels;
  }
  if (subs_.at(sub)->get_option_no_throw("--future-ms") && given(sub, "--future-ms")) {
    cfg.model.future_ms = args_.future_ms;
  }
  return cfg;
}

void Cli::report_training(const std::string& sub, const TrainReport& r) {
  out_ << sub << " steps=" << r.steps.size() << " initial_rec=" << r.initial.rec
       << " final_rec=" << r.final.rec << " initial_total=" << r.initial.total
       << " final_total=" << r.final.total << " checkpoint=" << args_.out << '\n';
}

void Cli::train(const std::string& sub, TrainMode mode) {
  RunConfig cfg = resolve(sub);
  cfg.train.mode = mode;
  if (mode == TrainMode::kFinetune) {
    if (!cfg.lr_set) cfg.train.learning_rate = 1e-6;
    if (!cfg.epochs_set) cfg.train.epochs = 10;
  }
  std::optional<StudentNet> init;
  if (mode == TrainMode::kFinetune) {
    init.emplace(load_checkpoint(args_.init));
    cfg.model = init->config();
  }
  validate_with([&] {
    cfg.model.validate();
    cfg.train.validate();
  });
  if (!(cfg.train.learning_rate > 0.0)) invalid("train.learning_rate must be > 0");
  if (mode == TrainMode::kHybrid && args_.s0.empty()) invalid("hybrid needs --s0");

  std::optional<StudentNet> intermediate;
  if (!args_.s0.empty()) intermediate.emplace(load_checkpoint(args_.s0));
  PseudoLabelDataset ds = dataset();

  StudentNet student = init ? std::move(*init) : StudentNet(cfg.model);
  TrainReport report;
  switch (mode) {
    case TrainMode::kHeterogeneous:
      report = train_heterogeneous(ds, student, cfg.train);
      break;
    case TrainMode::kHybrid:
      report = train_hybrid(ds, *intermediate, student, cfg.train);
      break;
    case TrainMode::kFinetune:
      report = finetune(ds, student, cfg.train, intermediate ? &*intermediate : nullptr);
      break;
  }
  save_checkpoint(student, args_.out);
  write_train_log(report, args_.out + ".log.csv");

  Manifest m = manifest(sub);
  m.seed = cfg.train.seed;
  m.inputs = {{"labels", args_.labels}, {"corpus", args_.corpus}};
  if (!args_.s0.empty()) m.inputs["s0"] = args_.s0;
  if (!args_.init.empty()) m.inputs["init"] = args_.init;
  m.outputs = {{"checkpoint", args_.out}, {"log", args_.out + ".log.csv"}};
  m.resolved = config_json(cfg);
  m.write(args_.out);
  report_training(sub, report);
}

void Cli::synth_corpus() {
  const std::string sub = "synth-corpus";
  if (args_.tracks == 0) invalid("--tracks must be positive");
  if (!(args_.seconds > 0.0) || args_.seconds > 600.0) invalid("--seconds must be in (0, 600]");
  fs::create_directories(args_.out);
  Manifest m = manifest(sub);
  m.seed = args_.seed;
  json files = json::array();
  for (std::size_t i = 0; i < args_.tracks; ++i) {
    std::vector<PhonemeInterval> intervals;
    const AudioTrack track = synth_speech(args_.seed * 1000 + i, args_.seconds, &intervals);
    char name[32];
    std::snprintf(name, sizeof(name), "track_%03zu", i);
    const fs::path base = fs::path(args_.out) / name;
    save_wav(track, base.string() + ".wav");
    save_intervals(intervals, base.string() + ".tsv");
    files.push_back(std::string(name) + ".wav");
  }
  save_lip_geometry(synthetic_lip_geometry(args_.seed), (fs::path(args_.out) / "geometry.json").string());
  m.outputs = {{"directory", args_.out}, {"tracks", files}, {"geometry", "geometry.json"}};
  m.resolved = {{"tracks", args_.tracks}, {"seconds", args_.seconds}};
  m.write(args_.out);
  out_ << sub << " tracks=" << args_.tracks << " out=" << args_.out << '\n';
}

void Cli::pseudolabel() {
  const std::string sub = "pseudolabel";
  const RunConfig cfg = resolve(sub);
  if (!fs::is_directory(args_.corpus)) invalid("corpus directory not found: " + args_.corpus);
  const auto tracks = load_corpus(args_.corpus);
  const SyntheticTeacher teacher(cfg.teacher_seed);
  const PseudoLabelDataset ds = generate_dataset(tracks, teacher);
  save_labels(ds, args_.out);
  std::size_t frames = 0;
  for (const auto& item : ds.items) frames += item.frames.size();
  Manifest m = manifest(sub);
  m.seed = cfg.teacher_seed;
  m.inputs = {{"corpus", args_.corpus}};
  m.outputs = {{"labels", args_.out}};
  m.resolved = {{"teacher", {{"seed", cfg.teacher_seed}, {"kind", "synthetic"}}}};
  m.write(args_.out);
  out_ << sub << " tracks=" << ds.items.size() << " frames=" << frames << " out=" << args_.out
       << '\n';
}

void Cli::evaluate_cmd() {
  const std::string sub = "eval";
  EvalOptions opt;
  opt.stream.ensemble = args_.ensemble || !args_.alphas.empty();
  if (!args_.alphas.empty()) opt.stream.alphas = parse_alphas(args_.alphas);
  if (!std::isfinite(args_.threshold)) invalid("--threshold must be finite");
  opt.threshold = args_.threshold;
  opt.model = args_.model_name.empty() ? fs::path(args_.checkpoint).stem().string()
                                       : args_.model_name;
  const StudentNet net = load_checkpoint(args_.checkpoint);
  const EvalCorpus corpus = load_eval_corpus(args_.corpus, args_.labels, args_.geometry);
  const EvalReport report = evaluate(net, corpus, opt);
  write_eval_csv({report}, args_.out);
  Manifest m = manifest(sub);
  m.inputs = {{"checkpoint", args_.checkpoint},
              {"corpus", args_.corpus},
              {"labels", args_.labels},
              {"geometry", args_.geometry}};
  m.outputs = {{"report", args_.out}};
  m.resolved = {{"ensemble", opt.stream.ensemble},
                {"alphas", opt.stream.alphas},
                {"threshold", opt.threshold},
                {"tolerance_frames", opt.tolerance_frames}};
  m.write(args_.out);
  out_ << eval_csv_header() << '\n' << eval_csv_row(report) << '\n';
}

void Cli::account() {
  const std::string sub = "account";
  const RunConfig cfg = resolve(sub);
  validate_with([&] { cfg.model.validate(); });
  const StudentNet net(cfg.model);
  const ResourceReport r = net.count_resources();
  std::ostringstream os;
  os << "channels=" << cfg.model.channels << " future_ms=" << cfg.model.future_ms
     << " param_count=" << r.param_count << " mac_count=" << r.mac_count
     << " peak_memory_bytes=" << r.peak_memory_bytes << '\n';
  out_ << os.str();
  if (!args_.out.empty()) {
    write_text(args_.out, os.str());
    Manifest m = manifest(sub);
    m.outputs = {{"report", args_.out}};
    m.resolved = config_json(cfg)["model"];
    m.write(args_.out);
  }
}

int Cli::gradcheck(std::ostream& err) {
  const std::string sub = "gradcheck";
  GradCheckConfig gc;
  gc.seed = args_.seed;
  gc.max_size = args_.gc_size;
  gc.seeds = args_.gc_seeds;
  gc.network_seeds = args_.gc_network_seeds;
  gc.network = args_.gc_network_seeds > 0;
  gc.corrupt = parse_op(args_.corrupt);
  validate_with([&] {
    if (gc.max_size < 8) fail(ErrorKind::kInvalidArgument, "--size must be >= 8");
    if (gc.seeds == 0) fail(ErrorKind::kInvalidArgument, "--seeds must be positive");
  });
  const GradCheckReport report = run_gradcheck(gc);
  out_ << report.to_text();
  if (!args_.out.empty()) {
    write_text(args_.out, report.to_text());
    Manifest m = manifest(sub);
    m.seed = gc.seed;
    m.outputs = {{"report", args_.out}};
    m.resolved = {{"seeds", gc.seeds},
                  {"size", gc.max_size},
                  {"network_seeds", gc.network_seeds},
                  {"step", gc.step},
                  {"tolerance", gc.tolerance}};
    m.write(args_.out);
  }
  if (report.passed()) return kExitOk;
  error_line(err, "gradcheck_failed", "analytic and numeric gradients disagree");
  return kExitRuntime;
}

void Cli::stream() {
  StreamConfig sc;
  sc.ensemble = args_.ensemble || !args_.alphas.empty();
  if (!args_.alphas.empty()) sc.alphas = parse_alphas(args_.alphas);
  const StudentNet net = load_checkpoint(args_.checkpoint);
  StreamEngine engine(net, sc);

  char line[32];
  auto emit = [&](const StreamFrame& f) {
    std::string row = std::to_string(f.frame_index);
    for (float v : f.rig) {
      std::snprintf(line, sizeof(line), ",%.9g", static_cast<double>(v));
      row += line;
    }
    row += '\n';
    out_ << row;
  };

  std::vector<char> bytes(4096);
  std::vector<float> samples;
  bool odd = false;
  char carry = 0;
  while (in_) {
    in_.read(bytes.data() + (odd ? 1 : 0), static_cast<std::streamsize>(bytes.size() - 1));
    std::size_t got = static_cast<std::size_t>(in_.gcount()) + (odd ? 1 : 0);
    if (odd) bytes[0] = carry;
    odd = got % 2 == 1;
    if (odd) carry = bytes[--got];
    samples.resize(got / 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto lo = static_cast<std::uint8_t>(bytes[2 * i]);
      const auto hi = static_cast<std::uint8_t>(bytes[2 * i + 1]);
      const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
      samples[i] = static_cast<float>(v) / 32768.0f;
    }
    std::size_t pos = 0;
    while (pos < samples.size()) {
      pos += engine.push_audio(std::span<const float>(samples).subspan(pos));
      while (auto f = engine.next_frame()) emit(*f);
    }
  }
  if (odd) fail(ErrorKind::kTruncated, "odd number of PCM bytes on standard input");
  engine.finish();
  while (auto f = engine.next_frame()) emit(*f);
  out_.flush();
}

int Cli::run(CLI::App& app, std::ostream& err) {
  app.require_subcommand(1);

  auto* synth = add(app, "synth-corpus", "write a synthetic speech corpus");
  synth->add_option("--out", args_.out, "output directory")->required();
  synth->add_option("--seed", args_.seed, "corpus seed");
  synth->add_option("--tracks", args_.tracks, "number of tracks");
  synth->add_option("--seconds", args_.seconds, "seconds per track");

  auto* label = add(app, "pseudolabel", "label a corpus with the teacher");
  label->add_option("--corpus", args_.corpus, "directory of WAV files")->required();
  label->add_option("--out", args_.out, "label file")->required();
  label->add_option("--config", args_.config, "JSON config")->check(CLI::ExistingFile);
  label->add_option("--seed", args_.seed, "teacher seed");

  auto* distill = add(app, "distill", "heterogeneous distillation");
  auto* hybrid = add(app, "hybrid", "hybrid distillation from an intermediate network");
  auto* tune = add(app, "finetune", "fine-tune an existing student");
  for (auto* sub : {distill, hybrid, tune}) {
    sub->add_option("--labels", args_.labels, "label file")->required()->check(CLI::ExistingFile);
    sub->add_option("--corpus", args_.corpus, "corpus directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    sub->add_option("--out", args_.out, "output checkpoint")->required();
    add_model_flags(sub);
  }
  hybrid->add_option("--s0", args_.s0, "intermediate checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  tune->add_option("--init", args_.init, "checkpoint to fine-tune")
      ->required()
      ->check(CLI::ExistingFile);
  tune->add_option("--s0", args_.s0, "intermediate checkpoint for the feature term")
      ->check(CLI::ExistingFile);

  auto* eval = add(app, "eval", "score a checkpoint on a labelled corpus");
  eval->add_option("--checkpoint", args_.checkpoint, "student checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--corpus", args_.corpus, "corpus directory")->required();
  eval->add_option("--labels", args_.labels, "label file")->required();
  eval->add_option("--geometry", args_.geometry, "lip geometry JSON")->required();
  eval->add_option("--out", args_.out, "report CSV")->required();
  eval->add_option("--alphas", args_.alphas, "ensemble weights a,b,c");
  eval->add_flag("--ensemble", args_.ensemble, "use ensemble smoothing");
  eval->add_option("--threshold", args_.threshold, "lip closure threshold");
  eval->add_option("--model", args_.model_name, "model name for the report");

  auto* acct = add(app, "account", "parameter, MAC and memory counts");
  add_model_flags(acct);
  acct->add_option("--out", args_.out, "report file");

  auto* grad = add(app, "gradcheck", "finite-difference gradient check");
  grad->add_option("--seed", args_.seed, "base seed");
  grad->add_option("--size", args_.gc_size, "max elements per random input");
  grad->add_option("--seeds", args_.gc_seeds, "random cases per op");
  grad->add_option("--network-seeds", args_.gc_network_seeds, "network cases (0 skips)");
  grad->add_option("--out", args_.out, "report file");
  grad->add_option("--corrupt", args_.corrupt, "")->group("");

  auto* strm = add(app, "stream", "stdin s16le PCM to stdout CSV");
  strm->add_option("--checkpoint", args_.checkpoint, "student checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  strm->add_option("--alphas", args_.alphas, "ensemble weights a,b,c");
  strm->add_flag("--ensemble", args_.ensemble, "use ensemble smoothing");

  try {
    app.parse(argc_, raw_argv_);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out_, err);
    error_line(err, "validation", e.what());
    return kExitValidation;
  }

  try {
    apply_threads();
    if (synth->parsed()) synth_corpus();
    if (label->parsed()) pseudolabel();
    if (distill->parsed()) train("distill", TrainMode::kHeterogeneous);
    if (hybrid->parsed()) train("hybrid", TrainMode::kHybrid);
    if (tune->parsed()) train("finetune", TrainMode::kFinetune);
    if (eval->parsed()) evaluate_cmd();
    if (acct->parsed()) account();
    if (grad->parsed()) return gradcheck(err);
    if (strm->parsed()) stream();
  } catch (const Error& e) {
    const bool validation = e.kind() == ErrorKind::kValidation;
    error_line(err, to_string(e.kind()), e.what());
    return validation ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    error_line(err, "internal", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app("Speech-to-rig distillation, evaluation and streaming", "rigdistill");
  Cli cli(argc, argv, in, out);
  return cli.run(app, err);
}

}  // namespace rigdistill
