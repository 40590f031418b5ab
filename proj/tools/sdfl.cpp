// sdfl: train and run the dilated-convolution speech denoiser.
//
// Exit codes: 0 success, 1 training or internal failure, 2 usage or
// configuration error, 3 data error.

#include "sdfl/checkpoint.hpp"
#include "sdfl/config.hpp"
#include "sdfl/corpus.hpp"
#include "sdfl/errors.hpp"
#include "sdfl/eval.hpp"
#include "sdfl/gradcheck.hpp"
#include "sdfl/parallel.hpp"
#include "sdfl/synth.hpp"
#include "sdfl/trainer.hpp"
#include "sdfl/wav.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sdfl;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

/// Settings shared by the two training commands: a config file overlaid with
/// flags.
struct TrainFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::string> loss;
  std::string log;
  std::string out;
  std::string resume;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config, "key=value config file");
  cmd->add_option("--seed", f.seed, "overrides config 'seed'");
  cmd->add_option("--epochs", f.epochs, "overrides config 'epochs'");
  cmd->add_option("--lr", f.lr, "overrides config 'learning_rate'");
  cmd->add_option("--log", f.log, "append per-iteration losses to this CSV");
  cmd->add_option("--out", f.out, "checkpoint to write")->required();
  cmd->add_option("--resume", f.resume, "continue from this checkpoint");
}

RunConfig load_run_config(const TrainFlags& f) {
  KeyValues kv;
  if (!f.config.empty()) {
    if (!fs::exists(f.config)) throw ConfigError("config file not found: " + f.config);
    kv = read_key_values(f.config);
  }
  if (f.seed) kv["seed"] = std::to_string(*f.seed);
  if (f.epochs) kv["epochs"] = std::to_string(*f.epochs);
  if (f.lr) kv["learning_rate"] = detail::format_double(*f.lr);
  if (f.loss) kv["loss_kind"] = *f.loss;
  RunConfig rc;
  apply_key_values(rc, kv);
  return rc;
}

Manifest open_manifest(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("manifest not found: " + path);
  auto m = read_manifest(path);
  m.validate();
  return m;
}

/// Append-mode CSV that writes its header only into an empty file.
std::unique_ptr<std::ofstream> open_log(const std::string& path, const std::string& header) {
  if (path.empty()) return nullptr;
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const bool fresh = !fs::exists(p) || fs::file_size(p) == 0;
  auto out = std::make_unique<std::ofstream>(p, std::ios::app);
  if (!*out) throw DataError("cannot open log file " + path);
  if (fresh) *out << header << '\n';
  *out << std::setprecision(9);
  return out;
}

void check_resume_hash(const Checkpoint& c, const RunConfig& rc) {
  const auto want = std::to_string(fnv1a(canonical_config(rc)));
  if (c.meta_at("train.config_hash") != want) {
    throw ConfigError("resume: configuration differs from the one the checkpoint was trained with");
  }
  if (c.meta_at("train.seed") != std::to_string(rc.train.seed)) {
    throw ConfigError("resume: seed differs from the checkpoint's");
  }
}

std::vector<fs::path> wav_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ConfigError("no .wav files in " + dir);
  return out;
}

std::string relative_source(const fs::path& file, const fs::path& base) {
  const auto rel = fs::relative(fs::absolute(file), fs::absolute(base));
  return rel.empty() ? fs::absolute(file).generic_string() : rel.generic_string();
}

std::string snr_tag(double snr) {
  std::ostringstream os;
  os << snr;
  return os.str();
}

// ---------------------------------------------------------------------------

/// Classification tasks from the classifier records of the manifests, in
/// order of first appearance (or in the order given by the config).
std::vector<ClassifierTask> collect_tasks(const std::vector<Manifest>& manifests, RunConfig& rc) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<const Manifest*, const Record*>>> by_task;
  for (const auto& m : manifests) {
    for (const auto& r : m.records) {
      if (r.role != Role::classifier) continue;
      if (r.task.empty()) throw DataError("classifier record '" + r.id + "' has no task");
      if (!by_task.count(r.task)) order.push_back(r.task);
      by_task[r.task].push_back({&m, &r});
    }
  }
  if (order.empty()) throw DataError("no classifier records in the given manifests");
  if (rc.tasks.empty()) {
    for (const auto& name : order) {
      TaskSpec t{name, 0, LabelMode::softmax};
      for (const auto& [m, r] : by_task[name]) {
        for (std::size_t l : r->labels) t.classes = std::max(t.classes, l + 1);
        if (r->labels.size() != 1) t.mode = LabelMode::sigmoid;
      }
      if (t.classes == 0) throw DataError("task '" + name + "' has no labels");
      rc.tasks.push_back(t);
    }
  } else {
    for (const auto& name : order) {
      const bool known = std::any_of(rc.tasks.begin(), rc.tasks.end(), [&](const TaskSpec& t) { return t.name == name; });
      if (!known) throw ConfigError("manifest task '" + name + "' is not listed in config 'tasks'");
    }
  }
  std::vector<ClassifierTask> tasks;
  for (const auto& spec : rc.tasks) {
    ClassifierTask t;
    t.spec = spec;
    for (const auto& [m, r] : by_task[spec.name]) {
      t.clips.push_back({r->id, m->resolve(*r), nullptr});
      t.labels.push_back(r->labels);
    }
    if (t.clips.empty()) throw DataError("config task '" + spec.name + "' has no files in the manifests");
    t.validate();
    tasks.push_back(std::move(t));
  }
  return tasks;
}

int cmd_pretrain(const TrainFlags& f, const std::vector<std::string>& manifest_paths) {
  RunConfig rc = load_run_config(f);
  std::vector<Manifest> manifests;
  for (const auto& p : manifest_paths) manifests.push_back(open_manifest(p));
  const auto tasks = collect_tasks(manifests, rc);

  ClassifierTrainingState state = [&] {
    if (!f.resume.empty()) {
      if (!fs::exists(f.resume)) throw ConfigError("resume checkpoint not found: " + f.resume);
      const auto c = load_checkpoint(f.resume);
      check_resume_hash(c, rc);
      return featnet_from_checkpoint(c);
    }
    Rng rng(derive_seed(rc.train.seed, 0));
    return ClassifierTrainingState{featnet_init<float>(rc.tasks, rng, rc.featnet), Adam<float>{}, 0, {}};
  }();
  if (!(state.params.config == rc.featnet) || state.params.tasks != rc.tasks) {
    throw ConfigError("resume: checkpoint architecture differs from the configuration");
  }

  std::cout << "pretrain: tasks " << format_tasks(rc.tasks) << "; files";
  for (const auto& t : tasks) std::cout << ' ' << t.clips.size();
  std::cout << "; epochs " << state.epochs_done << " -> " << rc.train.epochs << std::endl;

  auto log = open_log(f.log, "epoch,iteration,task,loss");
  ClassifierHooks hooks;
  hooks.iteration_csv = log.get();
  hooks.on_epoch_end = [&](const ClassifierTrainingState& s) {
    const auto& l = s.log.back();
    std::cout << "epoch " << l.epoch << " loss " << l.mean_loss << " accuracy";
    for (std::size_t p = 0; p < l.accuracy.size(); ++p) std::cout << ' ' << rc.tasks[p].name << '=' << l.accuracy[p];
    std::cout << std::endl;
    const auto every = rc.train.checkpoint_every;
    if (every > 0 && s.epochs_done % every == 0 && s.epochs_done != rc.train.epochs) {
      save_checkpoint(f.out, to_checkpoint(s, rc));
    }
  };
  train_classifier(tasks, rc.train, state, hooks);
  save_checkpoint(f.out, to_checkpoint(state, rc));
  std::cout << "wrote " << f.out << std::endl;
  return 0;
}

int cmd_train(const TrainFlags& f, const std::string& manifest_path, const std::string& featnet_path) {
  RunConfig rc = load_run_config(f);
  const auto manifest = open_manifest(manifest_path);

  std::optional<ClassifierTrainingState> featnet;
  if (rc.train.loss_kind == LossKind::feature) {
    if (featnet_path.empty()) throw ConfigError("loss_kind=feature needs --featnet <checkpoint>");
    if (!fs::exists(featnet_path)) throw ConfigError("feature network checkpoint not found: " + featnet_path);
    featnet = featnet_from_checkpoint(load_checkpoint(featnet_path));
    for (const auto& st : featnet->params.bn) {
      if (!st.initialized()) {
        throw ConfigError("feature network checkpoint has no running statistics; pretrain for at least one epoch");
      }
    }
  }

  std::vector<TrainingPair> corpus;
  for (const auto* r : manifest.with_role(Role::noisy)) {
    const auto* clean = manifest.find(r->clean_id());
    corpus.push_back({r->id, {r->id, manifest.resolve(*r), nullptr}, {clean->id, manifest.resolve(*clean), nullptr}});
  }
  if (corpus.empty()) throw DataError(manifest_path + ": no noisy records to train on");

  DenoiserTrainingState state = [&] {
    if (!f.resume.empty()) {
      if (!fs::exists(f.resume)) throw ConfigError("resume checkpoint not found: " + f.resume);
      const auto c = load_checkpoint(f.resume);
      check_resume_hash(c, rc);
      return denoiser_from_checkpoint(c);
    }
    return make_denoiser_state(rc.train, rc.denoiser);
  }();
  if (!(state.params.config == rc.denoiser)) {
    throw ConfigError("resume: checkpoint architecture differs from the configuration");
  }

  std::cout << "train: " << corpus.size() << " pairs; loss " << to_string(rc.train.loss_kind) << "; epochs "
            << state.epochs_done << " -> " << rc.train.epochs << std::endl;

  std::string header = "epoch,iteration,loss";
  if (rc.train.loss_kind == LossKind::feature) {
    for (std::size_t m = 1; m <= rc.train.feature_depth; ++m) header += ",term_" + std::to_string(m);
  }
  auto log = open_log(f.log, header);
  DenoiserHooks hooks;
  hooks.iteration_csv = log.get();
  hooks.on_calibrated = [](std::size_t epoch, const LossWeights& w) {
    std::cout << "calibrated loss weights after epoch " << epoch << ": lambda =";
    for (double l : w.lambda) std::cout << ' ' << std::setprecision(9) << l;
    std::cout << std::setprecision(6) << std::endl;
  };
  hooks.on_epoch_end = [&](const DenoiserTrainingState& s) {
    const auto& l = s.log.back();
    std::cout << "epoch " << l.epoch << " loss " << l.mean_loss;
    if (!l.mean_terms.empty()) {
      std::cout << " terms";
      for (double t : l.mean_terms) std::cout << ' ' << t;
    }
    std::cout << std::endl;
    const auto every = rc.train.checkpoint_every;
    if (every > 0 && s.epochs_done % every == 0 && s.epochs_done != rc.train.epochs) {
      save_checkpoint(f.out, to_checkpoint(s, rc));
    }
  };
  train_denoiser(corpus, featnet ? &featnet->params : nullptr, rc.train, state, hooks);
  save_checkpoint(f.out, to_checkpoint(state, rc));
  if (!state.log.empty()) std::cout << "final loss " << std::setprecision(17) << state.log.back().mean_loss << std::endl;
  std::cout << "wrote " << f.out << std::endl;
  return 0;
}

int cmd_denoise(const std::string& ckpt_path, const std::string& input, const std::string& out_dir) {
  if (!fs::exists(ckpt_path)) throw ConfigError("checkpoint not found: " + ckpt_path);
  if (!fs::exists(input)) throw ConfigError("input not found: " + input);
  auto state = denoiser_from_checkpoint(load_checkpoint(ckpt_path));

  std::vector<std::pair<std::string, fs::path>> jobs;  // (output stem, input file)
  if (fs::path(input).extension() == ".wav") {
    jobs.push_back({fs::path(input).stem().string(), input});
  } else {
    const auto m = open_manifest(input);
    auto noisy = m.with_role(Role::noisy);
    if (noisy.empty()) throw DataError(input + ": no noisy records to denoise");
    for (const auto* r : noisy) jobs.push_back({r->id, m.resolve(*r)});
  }
  fs::create_directories(out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> seconds(jobs.size(), 0.0);
  parallel_for(jobs.size(), thread_count(), [&](std::size_t i) {
    const Waveform in = read_wav(jobs[i].second);
    Waveform out;
    out.samples = denoise<float>(in.samples, state.params);
    write_wav(fs::path(out_dir) / (jobs[i].first + ".wav"), out, SampleFormat::float32);
    seconds[i] = static_cast<double>(in.size()) / kSampleRate;
  });
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double audio = 0;
  for (double s : seconds) audio += s;
  std::cout << "denoised " << jobs.size() << " file(s), " << audio << " s of audio in " << wall
            << " s; realtime factor " << (audio > 0 ? wall / audio : 0.0) << std::endl;
  return 0;
}

int cmd_mix(const std::string& clean_dir, const std::string& noise_dir, const std::vector<double>& snrs,
            std::uint64_t seed, const std::string& out_dir) {
  if (snrs.empty()) throw ConfigError("--snr needs at least one value");
  const auto cleans = wav_files(clean_dir);
  const auto noises = wav_files(noise_dir);
  const fs::path out(out_dir);
  fs::create_directories(out);

  Manifest m;
  m.remarks.push_back("mix seed=" + std::to_string(seed));
  std::vector<std::pair<std::string, Waveform>> clean_audio, noise_audio;
  for (const auto& p : cleans) {
    Waveform w = read_wav(p);
    if (peak(w.samples) == 0) {
      m.remarks.push_back("skipped silent clean file " + p.filename().string());
      std::cerr << "warning: skipping silent clean file " << p << std::endl;
      continue;
    }
    clean_audio.push_back({p.stem().string(), std::move(w)});
  }
  for (const auto& p : noises) {
    Waveform w = read_wav(p);
    if (peak(w.samples) == 0) {
      m.remarks.push_back("skipped silent noise file " + p.filename().string());
      std::cerr << "warning: skipping silent noise file " << p << std::endl;
      continue;
    }
    m.records.push_back({p.stem().string(), relative_source(p, out), Role::noise, "", {}, "", std::nullopt});
    noise_audio.push_back({p.stem().string(), std::move(w)});
  }

  std::uint64_t stream = 0;
  std::size_t written = 0;
  for (const auto& [cid, clean] : clean_audio) {
    bool clean_written = false;
    for (const auto& [nid, noise] : noise_audio) {
      // One noise segment per (clean, noise) pair, shared by all its SNRs.
      Rng rng(derive_seed(seed, stream++));
      const auto scaled = peak_normalize_pair(clean, fit_noise(noise, clean.size(), rng), 0.5);
      if (!clean_written) {
        const auto rel = "clean/" + cid + ".wav";
        write_wav(out / rel, scaled.clean, SampleFormat::float32);
        m.records.push_back({cid, rel, Role::clean, "", {}, "", std::nullopt});
        clean_written = true;
      }
      for (double snr : snrs) {
        const auto mix = mix_at_snr(scaled.clean, scaled.noise, snr);
        const auto id = cid + "__" + nid + "__snr" + snr_tag(snr);
        const auto rel = "noisy/" + id + ".wav";
        write_wav(out / rel, mix.noisy, SampleFormat::float32);
        m.records.push_back({id, rel, Role::noisy, "", {}, cid + ":" + nid, snr});
        m.remarks.push_back("gain " + id + " " + detail::format_double(mix.gain));
        if (mix.clipped > 0) {
          m.remarks.push_back("clipped " + id + " " + std::to_string(mix.clipped) + " samples");
        }
        ++written;
      }
    }
  }
  write_manifest(out / "manifest.csv", m);
  std::cout << "wrote " << written << " noisy files and " << (out / "manifest.csv").string() << std::endl;
  return 0;
}

int cmd_evaluate(const std::string& manifest_path, const std::vector<std::string>& system_args,
                 std::size_t tranches, const std::string& score_csv, const std::string& out_dir) {
  const auto m = open_manifest(manifest_path);
  const auto noisy = m.with_role(Role::noisy);
  if (noisy.empty()) throw DataError(manifest_path + ": no noisy records to evaluate");

  std::vector<std::pair<std::string, fs::path>> systems;
  for (const auto& arg : system_args) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--system expects name=dir, got '" + arg + "'");
    systems.push_back({arg.substr(0, eq), arg.substr(eq + 1)});
  }
  std::vector<std::string> missing;
  for (const auto* r : noisy) {
    if (!fs::exists(m.resolve(*r))) missing.push_back(m.resolve(*r).string());
    const auto* c = m.find(r->clean_id());
    if (!fs::exists(m.resolve(*c))) missing.push_back(m.resolve(*c).string());
    for (const auto& [name, dir] : systems) {
      const auto p = dir / (r->id + ".wav");
      if (!fs::exists(p)) missing.push_back(p.string());
    }
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << missing.size() << " missing file(s):";
    for (const auto& p : missing) os << "\n  " << p;
    throw DataError(os.str());
  }

  std::optional<std::map<std::string, double>> external;
  if (!score_csv.empty()) {
    std::ifstream in(score_csv);
    if (!in) throw ConfigError("score CSV not found: " + score_csv);
    external.emplace();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto t = detail::trim(line);
      if (t.empty() || t[0] == '#') continue;
      if (lineno == 1 && t == "id,score") continue;
      const auto fields = detail::split(t, ',');
      if (fields.size() != 2) throw DataError(score_csv + ":" + std::to_string(lineno) + ": expected id,score");
      try {
        (*external)[fields[0]] = std::stod(fields[1]);
      } catch (const std::exception&) {
        throw DataError(score_csv + ":" + std::to_string(lineno) + ": bad score '" + fields[1] + "'");
      }
    }
  }

  std::vector<EvalItem> items;
  for (const auto* r : noisy) {
    const auto noisy_path = m.resolve(*r);
    const auto clean_path = m.resolve(*m.find(r->clean_id()));
    items.push_back({r->id, [clean_path] { return read_wav(clean_path); }, [noisy_path] { return read_wav(noisy_path); }});
  }
  std::vector<SystemOutputs> outputs;
  for (const auto& [name, dir] : systems) {
    outputs.push_back({name, [dir](const std::string& id) { return read_wav(dir / (id + ".wav")); }});
  }
  const auto rep = evaluate_corpus(items, outputs, external, tranches, thread_count());

  fs::create_directories(out_dir);
  {
    std::ofstream csv(fs::path(out_dir) / "report.csv");
    write_report_csv(csv, rep);
  }
  {
    std::ofstream txt(fs::path(out_dir) / "report.txt");
    write_report_text(txt, rep);
  }
  write_report_text(std::cout, rep);
  return 0;
}

int cmd_gradcheck(std::size_t trials, std::uint64_t seed) {
  constexpr double kTolerance = 1e-4;
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_gradient_suite(trials, seed);
  bool ok = true;
  std::cout << std::left << std::setw(28) << "check" << std::right << std::setw(10) << "probes" << std::setw(10)
            << "skipped" << std::setw(16) << "max rel error" << '\n';
  for (const auto& r : results) {
    const bool pass = r.max_rel_error < kTolerance && r.checked > 0;
    ok = ok && pass;
    std::cout << std::left << std::setw(28) << r.name << std::right << std::setw(10) << r.checked << std::setw(10)
              << r.skipped << std::setw(16) << std::scientific << std::setprecision(3) << r.max_rel_error
              << std::defaultfloat << (pass ? "  ok" : "  FAIL") << '\n';
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (ok ? "all gradients agree" : "gradient mismatch") << " (tolerance " << kTolerance << ", " << trials
            << " trials each, " << wall << " s)" << std::endl;
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech denoising with a deep feature loss"};
  app.require_subcommand(1);

  TrainFlags pre;
  std::vector<std::string> pre_manifests;
  auto* pretrain = app.add_subcommand("pretrain", "train the multi-task feature network");
  add_train_flags(pretrain, pre);
  pretrain->add_option("--manifest", pre_manifests, "manifest with classifier records (repeatable)")->required();

  TrainFlags tr;
  std::string train_manifest, featnet_path;
  auto* train = app.add_subcommand("train", "train the denoiser");
  add_train_flags(train, tr);
  train->add_option("--manifest", train_manifest, "manifest with noisy records")->required();
  train->add_option("--featnet", featnet_path, "pretrained feature network checkpoint");
  train->add_option("--loss", tr.loss, "overrides config 'loss_kind' (feature, l1, l2)");

  std::string dn_ckpt, dn_input, dn_out;
  auto* den = app.add_subcommand("denoise", "run a trained denoiser");
  den->add_option("--checkpoint", dn_ckpt, "denoiser checkpoint")->required();
  den->add_option("--input", dn_input, "WAV file or manifest")->required();
  den->add_option("--out-dir", dn_out, "output directory")->required();

  std::string mx_clean, mx_noise, mx_out;
  std::vector<double> mx_snr{0, 5, 10, 15};
  std::uint64_t mx_seed = 0;
  auto* mix = app.add_subcommand("mix", "build a noisy corpus from clean and noise directories");
  mix->add_option("--clean-dir", mx_clean)->required();
  mix->add_option("--noise-dir", mx_noise)->required();
  mix->add_option("--snr", mx_snr, "target SNRs in dB")->delimiter(',')->capture_default_str();
  mix->add_option("--seed", mx_seed)->capture_default_str();
  mix->add_option("--out-dir", mx_out)->required();

  std::string sy_spec, sy_out;
  std::optional<std::size_t> sy_speech, sy_noise, sy_cls;
  std::optional<double> sy_dur;
  std::optional<std::uint64_t> sy_seed;
  auto* syn = app.add_subcommand("synth", "generate a synthetic desk-scale corpus");
  syn->add_option("--spec", sy_spec, "key=value spec file");
  syn->add_option("--n-speech", sy_speech);
  syn->add_option("--n-noise", sy_noise);
  syn->add_option("--n-classifier", sy_cls, "files per classification task");
  syn->add_option("--duration", sy_dur, "seconds per file");
  syn->add_option("--seed", sy_seed);
  syn->add_option("--out-dir", sy_out)->required();

  std::string ev_manifest, ev_scores, ev_out;
  std::vector<std::string> ev_systems;
  std::size_t ev_tranches = kTranches;
  auto* ev = app.add_subcommand("evaluate", "score systems by SNR, overall and per tranche");
  ev->add_option("--manifest", ev_manifest, "manifest with noisy and clean records")->required();
  ev->add_option("--system", ev_systems, "name=dir holding <id>.wav outputs (repeatable)");
  ev->add_option("--tranches", ev_tranches)->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_option("--score-csv", ev_scores, "external per-file scores (id,score) for tranching");
  ev->add_option("--out-dir", ev_out)->required();

  std::size_t gc_trials = 20;
  std::uint64_t gc_seed = 0;
  auto* gc = app.add_subcommand("gradcheck", "compare backprop with finite differences");
  gc->add_option("--trials", gc_trials)->capture_default_str();
  gc->add_option("--seed", gc_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*pretrain) return cmd_pretrain(pre, pre_manifests);
    if (*train) return cmd_train(tr, train_manifest, featnet_path);
    if (*den) return cmd_denoise(dn_ckpt, dn_input, dn_out);
    if (*mix) return cmd_mix(mx_clean, mx_noise, mx_snr, mx_seed, mx_out);
    if (*syn) {
      KeyValues kv;
      if (!sy_spec.empty()) {
        if (!fs::exists(sy_spec)) throw ConfigError("spec file not found: " + sy_spec);
        kv = read_key_values(sy_spec);
      }
      if (sy_speech) kv["n_speech_like"] = std::to_string(*sy_speech);
      if (sy_noise) kv["n_noise_types"] = std::to_string(*sy_noise);
      if (sy_cls) kv["n_classifier_files"] = std::to_string(*sy_cls);
      if (sy_dur) kv["duration_s"] = detail::format_double(*sy_dur);
      if (sy_seed) kv["seed"] = std::to_string(*sy_seed);
      const auto spec = parse_synth_spec(kv);
      const auto corpus = synth_corpus(spec);
      write_synth_corpus(sy_out, corpus);
      std::cout << "wrote " << corpus.files.size() << " files and " << (fs::path(sy_out) / "corpus.csv").string()
                << std::endl;
      return 0;
    }
    if (*ev) return cmd_evaluate(ev_manifest, ev_systems, ev_tranches, ev_scores, ev_out);
    if (*gc) return cmd_gradcheck(gc_trials, gc_seed);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << std::endl;
    return kExitFailure;
  }
  return kExitUsage;
}
