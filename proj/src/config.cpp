#include "motionbeat/config.hpp"

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "motionbeat/errors.hpp"

namespace motionbeat {

using nlohmann::json;

const char* to_string(SralSource s) { return s == SralSource::pred ? "pred" : "gt"; }

EncoderConfig EncoderSettings::resolve(int input_dim, int bar_len, bool contact_guided) const {
  EncoderConfig c;
  c.num_layers = num_layers;
  c.hidden_dim = hidden_dim;
  c.num_heads = num_heads;
  c.embed_dim = embed_dim;
  c.input_dim = input_dim;
  c.bar_len = bar_len;
  c.ff_mult = ff_mult;
  c.contact_guided = contact_guided;
  c.phase_features = phase_features;
  c.alpha_logit_init = alpha_logit_init;
  c.alpha_val_init = alpha_val_init;
  return c;
}

void RunConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (negatives.tempo_count < 0) throw ConfigError("negatives.tempo_count must be >= 0");
  if (!(negatives.bpm_tolerance >= 0.0)) throw ConfigError("negatives.bpm_tolerance must be >= 0");
  if (!(soft_dtw_gamma > 0.0)) throw ConfigError("loss.soft_dtw_gamma must be > 0");
  if (!(aux_weight >= 0.0)) throw ConfigError("loss.aux_weight must be >= 0");
  try {
    optimizer.validate();
    loss.validate();
    audio_encoder.resolve(2, 4, false).validate();
    motion_encoder.resolve(2, 4, contact_guided).validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

RunConfig tiny_run_config() {
  RunConfig c;
  for (EncoderSettings* e : {&c.audio_encoder, &c.motion_encoder}) {
    e->num_layers = 2;
    e->hidden_dim = 64;
    e->num_heads = 4;
    e->embed_dim = 32;
    e->phase_features = true;
  }
  c.batch_size = 16;
  c.max_epochs = 30;
  c.optimizer.learning_rate = 1e-3;
  return c;
}

namespace {

class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + prefix() + key + "'");
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("bad value for config key '" + prefix() + key + "'");
    }
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string prefix() const { return where_.empty() ? "" : where_ + "."; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_encoder(const json& j, const std::string& where, EncoderSettings& e) {
  Reader r(j, where);
  r.get("num_layers", e.num_layers);
  r.get("hidden_dim", e.hidden_dim);
  r.get("num_heads", e.num_heads);
  r.get("embed_dim", e.embed_dim);
  r.get("ff_mult", e.ff_mult);
  r.get("phase_features", e.phase_features);
  r.get("alpha_logit_init", e.alpha_logit_init);
  r.get("alpha_val_init", e.alpha_val_init);
  r.finish();
}

json encoder_json(const EncoderSettings& e) {
  return json{{"num_layers", e.num_layers},         {"hidden_dim", e.hidden_dim},
              {"num_heads", e.num_heads},           {"embed_dim", e.embed_dim},
              {"ff_mult", e.ff_mult},               {"phase_features", e.phase_features},
              {"alpha_logit_init", e.alpha_logit_init}, {"alpha_val_init", e.alpha_val_init}};
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  std::string preset = "default";
  if (j.is_object() && j.contains("preset")) {
    try {
      preset = j.at("preset").get<std::string>();
    } catch (const json::exception&) {
      throw ConfigError("bad value for config key 'preset'");
    }
    if (preset == "tiny") {
      c = tiny_run_config();
    } else if (preset != "default") {
      throw ConfigError("unknown preset '" + preset + "' (expected tiny or default)");
    }
  }
  {
    Reader r(j, "");
    r.child("preset");
    if (const json* e = r.child("audio_encoder")) read_encoder(*e, "audio_encoder", c.audio_encoder);
    if (const json* e = r.child("motion_encoder")) read_encoder(*e, "motion_encoder", c.motion_encoder);
    r.get("contact_guided", c.contact_guided);
    if (const json* l = r.child("loss")) {
      Reader lr(*l, "loss");
      lr.get("tau", c.loss.tau);
      lr.get("lambda_beat", c.loss.lambda_beat);
      lr.get("lambda_bar", c.loss.lambda_bar);
      lr.get("alpha", c.loss.alpha);
      lr.get("soft_dtw_gamma", c.soft_dtw_gamma);
      lr.get("aux_weight", c.aux_weight);
      lr.get("symmetric", c.symmetric_ecl);
      lr.finish();
    }
    if (const json* n = r.child("negatives")) {
      Reader nr(*n, "negatives");
      nr.get("tempo_count", c.negatives.tempo_count);
      nr.get("bpm_tolerance", c.negatives.bpm_tolerance);
      nr.get("beat_jitter", c.negatives.beat_jitter);
      nr.get("jitter_gradient", c.negatives.jitter_gradient);
      nr.finish();
    }
    if (const json* o = r.child("optimizer")) {
      Reader orr(*o, "optimizer");
      orr.get("learning_rate", c.optimizer.learning_rate);
      orr.get("weight_decay", c.optimizer.weight_decay);
      orr.get("beta1", c.optimizer.beta1);
      orr.get("beta2", c.optimizer.beta2);
      orr.get("epsilon", c.optimizer.epsilon);
      orr.finish();
    }
    r.get("batch_size", c.batch_size);
    r.get("max_epochs", c.max_epochs);
    r.get("patience", c.patience);
    r.get("seed", c.seed);
    r.get("split_seed", c.split_seed);
    r.get("dataset", c.dataset);
    r.get("output_dir", c.output_dir);
    std::string source = to_string(c.sral_source);
    r.get("sral_source", source);
    r.finish();
    if (source == "pred") {
      c.sral_source = SralSource::pred;
    } else if (source == "gt") {
      c.sral_source = SralSource::gt;
    } else {
      throw ConfigError("sral_source must be 'pred' or 'gt'");
    }
  }
  c.validate();
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["audio_encoder"] = encoder_json(c.audio_encoder);
  j["motion_encoder"] = encoder_json(c.motion_encoder);
  j["contact_guided"] = c.contact_guided;
  j["loss"] = json{{"tau", c.loss.tau},
                   {"lambda_beat", c.loss.lambda_beat},
                   {"lambda_bar", c.loss.lambda_bar},
                   {"alpha", c.loss.alpha},
                   {"soft_dtw_gamma", c.soft_dtw_gamma},
                   {"aux_weight", c.aux_weight},
                   {"symmetric", c.symmetric_ecl}};
  j["negatives"] = json{{"tempo_count", c.negatives.tempo_count},
                        {"bpm_tolerance", c.negatives.bpm_tolerance},
                        {"beat_jitter", c.negatives.beat_jitter},
                        {"jitter_gradient", c.negatives.jitter_gradient}};
  j["optimizer"] = json{{"learning_rate", c.optimizer.learning_rate},
                        {"weight_decay", c.optimizer.weight_decay},
                        {"beta1", c.optimizer.beta1},
                        {"beta2", c.optimizer.beta2},
                        {"epsilon", c.optimizer.epsilon}};
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["split_seed"] = c.split_seed;
  j["dataset"] = c.dataset;
  j["output_dir"] = c.output_dir;
  j["sral_source"] = to_string(c.sral_source);
  return j.dump(2);
}

void apply_seed_env(RunConfig& config) {
  if (const char* s = std::getenv("MOTIONBEAT_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(s, &used);
      if (used != std::string(s).size()) throw std::invalid_argument("trailing characters");
      config.seed = v;
    } catch (const std::exception&) {
      throw ConfigError(std::string("MOTIONBEAT_SEED is not an unsigned integer: ") + s);
    }
  }
}

DatasetSpec dataset_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("dataset spec is not valid JSON: ") + e.what());
  }
  DatasetSpec spec = default_dataset_spec();
  SyntheticPairSpec& b = spec.base;
  Reader r(j, "");
  r.get("seed", b.seed);
  r.get("bpm_min", b.bpm_min);
  r.get("bpm_max", b.bpm_max);
  r.get("bar_len", b.bar_len);
  r.get("num_beats", b.num_beats);
  r.get("accent_pattern", b.accent_pattern);
  r.get("accent_palette", spec.accent_palette);
  r.get("rotate_patterns", spec.rotate_patterns);
  r.get("accent_perturb", spec.accent_perturb);
  r.get("num_styles", spec.num_styles);
  r.get("contact_lag_std", b.contact_lag_std);
  r.get("feature_noise_std", b.feature_noise_std);
  r.get("num_joints", b.num_joints);
  r.get("motion_fps", b.motion_fps);
  r.get("sample_rate", b.audio.sample_rate);
  r.get("n_mels", b.audio.n_mels);
  r.finish();
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

DatasetSpec load_dataset_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset spec: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return dataset_spec_from_json(ss.str());
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c = run_config_from_json(ss.str());
  apply_seed_env(c);
  return c;
}

}  // namespace motionbeat
