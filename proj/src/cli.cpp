#include "motionbeat/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "motionbeat/checkpoint.hpp"
#include "motionbeat/config.hpp"
#include "motionbeat/errors.hpp"
#include "motionbeat/kernel_check.hpp"
#include "motionbeat/metrics.hpp"
#include "motionbeat/synthetic.hpp"
#include "motionbeat/trainer.hpp"

namespace motionbeat {

namespace {

using nlohmann::ordered_json;

struct Options {
  bool json = false;
  // gen-data
  std::string spec_path, out_path;
  int count = 0;
  std::optional<std::uint64_t> seed;
  // train
  std::string config_path, sral_source, data_path, out_dir;
  // eval
  std::string ckpt_path, split = "test", direction = "music_to_motion";
  std::uint64_t split_seed = 0;
  double sigma = 0.1;
  // grad-check
  std::string kernel;
  int samples = 200;
};

void require_file(const std::string& path, const char* what) {
  if (!std::filesystem::exists(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

std::vector<int> split_indices(const std::string& which, int count, std::uint64_t seed) {
  if (which == "all") {
    std::vector<int> all(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  const DatasetSplit s = split_dataset(count, seed);
  if (which == "train") return s.train;
  if (which == "val") return s.val;
  if (which == "test") return s.test;
  throw ConfigError("--split must be train, val, test or all");
}

int cmd_gen_data(const Options& o, std::ostream& out) {
  DatasetSpec spec = load_dataset_spec(o.spec_path);
  if (o.seed) spec.base.seed = *o.seed;
  if (o.count < 1) throw ConfigError("--count must be >= 1");
  const Dataset data = generate_dataset(spec, o.count);
  write_dataset(o.out_path, data);
  if (o.json) {
    out << ordered_json{{"pairs", o.count}, {"out", o.out_path}, {"seed", spec.base.seed}}.dump() << '\n';
  } else {
    out << "wrote " << o.count << " pairs to " << o.out_path << '\n';
  }
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  require_file(o.config_path, "config file");
  RunConfig cfg = load_run_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.sral_source.empty()) {
    if (o.sral_source == "pred") {
      cfg.sral_source = SralSource::pred;
    } else if (o.sral_source == "gt") {
      cfg.sral_source = SralSource::gt;
    } else {
      throw ConfigError("--sral-source must be pred or gt");
    }
  }
  if (!o.data_path.empty()) cfg.dataset = o.data_path;
  if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
  const TrainResult r = train_from_files(cfg, o.json ? nullptr : &out);
  if (o.json) {
    out << ordered_json{{"epochs", r.log.size()},
                        {"best_epoch", r.best_epoch},
                        {"best_val_r_at_1", r.best_val_r_at_1},
                        {"checkpoint", (std::filesystem::path(cfg.output_dir) / "checkpoint.bin").string()}}
               .dump()
        << '\n';
  } else {
    out << "best epoch " << r.best_epoch << " val_r_at_1 " << r.best_val_r_at_1 << '\n';
  }
  return 0;
}

int cmd_eval_retrieval(const Options& o, std::ostream& out) {
  require_file(o.ckpt_path, "checkpoint");
  require_file(o.data_path, "dataset");
  const MotionBeatModel model = load_checkpoint(o.ckpt_path);
  const Dataset data = read_dataset(o.data_path);
  const std::vector<int> idx = split_indices(o.split, static_cast<int>(data.size()), o.split_seed);
  if (idx.empty()) throw ConfigError("selected split is empty");
  const Embeddings e = embed_clips(model, data, idx);
  std::vector<RetrievalDirection> dirs;
  if (o.direction == "music_to_motion" || o.direction == "both") dirs.push_back(RetrievalDirection::music_to_motion);
  if (o.direction == "motion_to_music" || o.direction == "both") dirs.push_back(RetrievalDirection::motion_to_music);
  if (dirs.empty()) throw ConfigError("--direction must be music_to_motion, motion_to_music or both");
  for (RetrievalDirection d : dirs) {
    const RetrievalReport r = eval_retrieval(e.audio, e.motion, d);
    if (o.json) {
      out << retrieval_json(r) << '\n';
    } else {
      out << to_string(d) << " R@1 " << r.recall_at.at(1) << " R@5 " << r.recall_at.at(5) << " R@10 "
          << r.recall_at.at(10) << " MedR " << r.median_rank << " N " << r.ranks.size() << '\n';
    }
  }
  return 0;
}

int cmd_eval_align(const Options& o, std::ostream& out) {
  require_file(o.data_path, "dataset");
  const Dataset data = read_dataset(o.data_path);
  std::optional<MotionBeatModel> model;
  if (!o.ckpt_path.empty()) {
    require_file(o.ckpt_path, "checkpoint");
    model = load_checkpoint(o.ckpt_path);
  }
  const std::vector<int> idx = split_indices(o.split, static_cast<int>(data.size()), o.split_seed);
  if (idx.empty()) throw ConfigError("selected split is empty");
  double total = 0.0;
  int used = 0;
  for (int i : idx) {
    const Clip& c = data[static_cast<std::size_t>(i)];
    std::vector<double> contact = c.motion.annotation.contact_pulse;
    if (model) {
      contact = encoder_forward(c.motion.tokens, c.motion.grid, nullptr, model->motion, model->motion_config).contact;
    }
    const auto& bounds = c.audio.grid.boundaries;
    const std::vector<double> music = peak_beat_times(c.audio.annotation.onset_envelope, bounds);
    const std::vector<double> motion = peak_beat_times(contact, bounds);
    if (music.empty() || motion.empty()) continue;
    total += beat_alignment_score(music, motion, o.sigma);
    ++used;
  }
  if (used == 0) throw DomainError("no clip has both music and motion beats");
  const double bas = total / used;
  if (o.json) {
    out << ordered_json{{"bas", bas}, {"sigma", o.sigma}, {"clips", used}, {"source", model ? "contact_head" : "annotation"}}
               .dump()
        << '\n';
  } else {
    out << "BAS " << bas << " sigma " << o.sigma << " clips " << used << '\n';
  }
  return 0;
}

int cmd_grad_check(const Options& o, std::ostream& out) {
  const std::uint64_t seed = o.seed.value_or(0);
  double err = 0.0, limit = 0.0;
  int checked = 0;
  std::string worst;
  if (o.kernel == "softdtw") {
    const KernelCheckReport r = check_soft_dtw_gradients(20, seed);
    err = r.max_rel_error;
    checked = r.checked;
    limit = 1e-4;
  } else if (o.kernel == "emd") {
    const KernelCheckReport r = check_emd_gradients(20, seed);
    err = r.max_rel_error;
    checked = r.checked;
    limit = 1e-4;
  } else if (o.kernel == "model") {
    DatasetSpec spec = default_dataset_spec();
    spec.base.num_beats = 8;
    spec.base.seed = seed;
    const Dataset data = generate_dataset(spec, 6);
    RunConfig cfg = tiny_run_config();
    for (EncoderSettings* e : {&cfg.audio_encoder, &cfg.motion_encoder}) {
      e->hidden_dim = 16;
      e->num_heads = 2;
      e->embed_dim = 8;
    }
    cfg.batch_size = 4;
    cfg.negatives.tempo_count = 2;
    cfg.negatives.bpm_tolerance = 0.5;
    cfg.seed = seed;
    const std::vector<int> all{0, 1, 2, 3, 4, 5};
    const MotionBeatModel model = initial_model(cfg, data, all);
    const BatchPlan plan = plan_batch(model, data, {0, 1, 2, 3}, all, cfg, seed);
    const GradCheckReport r = grad_check_model(model, data, plan, cfg, 1e-4, o.samples, seed);
    err = r.max_rel_error;
    checked = r.checked;
    worst = r.worst_param;
    limit = 1e-3;
  } else {
    throw ConfigError("--kernel must be softdtw, emd or model");
  }
  const bool pass = err < limit;
  if (o.json) {
    ordered_json j{{"kernel", o.kernel}, {"max_rel_error", err}, {"checked", checked}, {"limit", limit}, {"pass", pass}};
    if (!worst.empty()) j["worst_param"] = worst;
    out << j.dump() << '\n';
  } else {
    out << "kernel " << o.kernel << " max_rel_error " << err << " checked " << checked << (pass ? " PASS" : " FAIL")
        << '\n';
  }
  return pass ? 0 : 2;
}

int cmd_inspect(const Options& o, std::ostream& out) {
  require_file(o.ckpt_path, "checkpoint");
  const MotionBeatModel m = load_checkpoint(o.ckpt_path);
  auto enc_json = [](const EncoderConfig& c, const ModelParams& p) {
    ordered_json tensors = ordered_json::array();
    for (const auto& t : p.tensors) {
      tensors.push_back(ordered_json{{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}, {"trainable", t.trainable}});
    }
    return ordered_json{{"num_layers", c.num_layers}, {"hidden_dim", c.hidden_dim},   {"num_heads", c.num_heads},
                        {"embed_dim", c.embed_dim},   {"input_dim", c.input_dim},     {"bar_len", c.bar_len},
                        {"ff_mult", c.ff_mult},       {"contact_guided", c.contact_guided},
                        {"phase_features", c.phase_features}, {"num_values", p.num_values()}, {"tensors", tensors}};
  };
  if (o.json) {
    out << ordered_json{{"audio", enc_json(m.audio_config, m.audio)}, {"motion", enc_json(m.motion_config, m.motion)}}.dump()
        << '\n';
    return 0;
  }
  for (int side = 0; side < 2; ++side) {
    const EncoderConfig& c = side == 0 ? m.audio_config : m.motion_config;
    const ModelParams& p = side == 0 ? m.audio : m.motion;
    out << (side == 0 ? "audio" : "motion") << " layers " << c.num_layers << " hidden " << c.hidden_dim << " heads "
        << c.num_heads << " embed " << c.embed_dim << " input " << c.input_dim << " bar_len " << c.bar_len
        << " contact_guided " << c.contact_guided << " values " << p.num_values() << '\n';
    for (const auto& t : p.tensors) {
      out << "  " << t.name << ' ' << t.value.rows() << 'x' << t.value.cols() << (t.trainable ? "" : " frozen") << '\n';
    }
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"motionbeat: beat-synchronous music-motion embeddings"};
  app.require_subcommand(1);
  Options o;
  app.add_flag("--json", o.json, "Machine-readable output");

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic paired dataset");
  gen->add_option("--spec", o.spec_path, "Dataset spec (JSON)")->required();
  gen->add_option("--out", o.out_path, "Output JSONL file")->required();
  gen->add_option("--count", o.count, "Number of pairs")->required();
  gen->add_option("--seed", o.seed, "Overrides the spec seed");
  gen->add_flag("--json", o.json);

  auto* tr = app.add_subcommand("train", "Train encoders from a run config");
  tr->add_option("--config", o.config_path, "Run config (JSON)")->required();
  tr->add_option("--seed", o.seed, "Overrides the config seed");
  tr->add_option("--sral-source", o.sral_source, "pred or gt");
  tr->add_option("--data", o.data_path, "Overrides the dataset path");
  tr->add_option("--out", o.out_dir, "Overrides the output directory");
  tr->add_flag("--json", o.json);

  auto* ev = app.add_subcommand("eval-retrieval", "Recall@K and median rank");
  ev->add_option("--ckpt", o.ckpt_path)->required();
  ev->add_option("--data", o.data_path)->required();
  ev->add_option("--split", o.split, "train, val, test or all");
  ev->add_option("--split-seed", o.split_seed);
  ev->add_option("--direction", o.direction, "music_to_motion, motion_to_music or both");
  ev->add_flag("--json", o.json);

  auto* al = app.add_subcommand("eval-align", "Beat alignment score");
  al->add_option("--data", o.data_path)->required();
  al->add_option("--ckpt", o.ckpt_path, "Use the contact head instead of annotations");
  al->add_option("--split", o.split);
  al->add_option("--split-seed", o.split_seed);
  al->add_option("--sigma", o.sigma, "Seconds");
  al->add_flag("--json", o.json);

  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  gc->add_option("--kernel", o.kernel, "softdtw, emd or model")->required();
  gc->add_option("--seed", o.seed);
  gc->add_option("--samples", o.samples, "Parameters sampled for --kernel model");
  gc->add_flag("--json", o.json);

  auto* ic = app.add_subcommand("inspect-ckpt", "Print checkpoint contents");
  ic->add_option("--ckpt", o.ckpt_path)->required();
  ic->add_flag("--json", o.json);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 1;
  }

  try {
    if (*gen) return cmd_gen_data(o, out);
    if (*tr) return cmd_train(o, out);
    if (*ev) return cmd_eval_retrieval(o, out);
    if (*al) return cmd_eval_align(o, out);
    if (*gc) return cmd_grad_check(o, out);
    if (*ic) return cmd_inspect(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace motionbeat
