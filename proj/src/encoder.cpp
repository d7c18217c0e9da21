#include "motionbeat/encoder.hpp"

#include <cmath>
#include <numbers>

#include "motionbeat/errors.hpp"
#include "motionbeat/rng.hpp"

namespace motionbeat {

void EncoderConfig::validate() const {
  if (num_layers < 1 || hidden_dim < 1 || num_heads < 1 || embed_dim < 1 || input_dim < 1 || bar_len < 1 ||
      ff_mult < 1) {
    throw DomainError("encoder dimensions must all be >= 1");
  }
  if (hidden_dim % num_heads != 0) throw DomainError("hidden_dim must be a multiple of num_heads");
  if (head_dim() % 2 != 0) throw DomainError("head_dim must be even for channel pairing");
  if (!(alpha_logit_init >= 0.0) || !(alpha_val_init >= 0.0)) throw DomainError("contact gain inits must be >= 0");
}

EncoderConfig full_encoder_config(int input_dim, int bar_len, bool contact_guided) {
  EncoderConfig cfg;
  cfg.input_dim = input_dim;
  cfg.bar_len = bar_len;
  cfg.contact_guided = contact_guided;
  return cfg;
}

EncoderConfig tiny_encoder_config(int input_dim, int bar_len, bool contact_guided) {
  EncoderConfig cfg = full_encoder_config(input_dim, bar_len, contact_guided);
  cfg.num_layers = 2;
  cfg.hidden_dim = 64;
  cfg.num_heads = 4;
  cfg.embed_dim = 32;
  return cfg;
}

int ModelParams::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name == name) return static_cast<int>(i);
  }
  throw DomainError("unknown parameter tensor '" + std::string(name) + "'");
}

std::size_t ModelParams::num_values() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.value.size());
  return n;
}

std::vector<TensorSpec> encoder_layout(const EncoderConfig& cfg) {
  cfg.validate();
  const int H = cfg.hidden_dim;
  const int F = cfg.ff_mult * H;
  std::vector<TensorSpec> l;
  l.push_back({"input.shift", 1, cfg.input_dim, false});
  l.push_back({"input.scale", 1, cfg.input_dim, false});
  l.push_back({"input.weight", cfg.token_width(), H, true});
  l.push_back({"input.bias", 1, H, true});
  for (int i = 0; i < cfg.num_layers; ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    l.push_back({p + "ln1.gain", 1, H, true});
    l.push_back({p + "ln1.bias", 1, H, true});
    l.push_back({p + "attn.wq", H, H, true});
    l.push_back({p + "attn.wk", H, H, true});
    l.push_back({p + "attn.wv", H, H, true});
    l.push_back({p + "attn.wo", H, H, true});
    l.push_back({p + "attn.alpha_logit", 1, 1, true});
    l.push_back({p + "attn.alpha_val", 1, 1, true});
    l.push_back({p + "ln2.gain", 1, H, true});
    l.push_back({p + "ln2.bias", 1, H, true});
    l.push_back({p + "ff.w1", H, F, true});
    l.push_back({p + "ff.b1", 1, F, true});
    l.push_back({p + "ff.w2", F, H, true});
    l.push_back({p + "ff.b2", 1, H, true});
  }
  l.push_back({"final_ln.gain", 1, H, true});
  l.push_back({"final_ln.bias", 1, H, true});
  l.push_back({"proj.weight", H, cfg.embed_dim, true});
  l.push_back({"proj.bias", 1, cfg.embed_dim, true});
  l.push_back({"onset_head.weight", H, 1, true});
  l.push_back({"onset_head.bias", 1, 1, true});
  l.push_back({"contact_head.weight", H, 1, true});
  l.push_back({"contact_head.bias", 1, 1, true});
  return l;
}

double softplus_value(double x) { return x > 30.0 ? x : (x < -30.0 ? std::exp(x) : std::log1p(std::exp(x))); }

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw DomainError("inverse_softplus needs y > 0");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

ModelParams init_encoder_params(const EncoderConfig& cfg, std::uint64_t seed) {
  Rng rng(mix64(seed));
  ModelParams params;
  for (const TensorSpec& spec : encoder_layout(cfg)) {
    NamedTensor t{spec.name, Matrix::Zero(spec.rows, spec.cols), spec.trainable};
    if (spec.name == "input.scale" || ends_with(spec.name, ".gain")) {
      t.value.setOnes();
    } else if (ends_with(spec.name, "alpha_logit")) {
      t.value(0, 0) = inverse_softplus(cfg.alpha_logit_init);
    } else if (ends_with(spec.name, "alpha_val")) {
      t.value(0, 0) = inverse_softplus(cfg.alpha_val_init);
    } else if (spec.rows > 1 && spec.name != "input.shift") {
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec.rows));
      for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = rng.uniform(-bound, bound);
    }
    params.tensors.push_back(std::move(t));
  }
  return params;
}

double alpha_logit(const ModelParams& p, int layer) {
  return softplus_value(p.get("layers." + std::to_string(layer) + ".attn.alpha_logit")(0, 0));
}

double alpha_val(const ModelParams& p, int layer) {
  return softplus_value(p.get("layers." + std::to_string(layer) + ".attn.alpha_val")(0, 0));
}

std::vector<double> beat_phases(const BeatGrid& grid) {
  std::vector<double> ph(static_cast<std::size_t>(grid.num_beats));
  for (int t = 0; t < grid.num_beats; ++t) {
    ph[static_cast<std::size_t>(t)] = 2.0 * std::numbers::pi * grid.bar_position(t) / grid.bar_len;
  }
  return ph;
}

BoundParams bind_params(ad::Graph& graph, const ModelParams& params, bool requires_grad) {
  BoundParams b;
  b.vars.reserve(params.tensors.size());
  for (const auto& t : params.tensors) b.vars.push_back(graph.leaf(t.value, requires_grad && t.trainable));
  return b;
}

namespace {

EncoderGraph encode_pass(ad::Graph& graph, const BoundParams& bound, const ModelParams& params,
                         const EncoderConfig& cfg, const Matrix& tokens, const BeatGrid& grid,
                         const std::vector<double>* contacts) {
  auto P = [&](const std::string& name) { return bound.vars[static_cast<std::size_t>(params.index_of(name))]; };

  const auto phases = beat_phases(grid);
  Matrix x(tokens.rows(), cfg.token_width());
  x.leftCols(cfg.input_dim) =
      (tokens.rowwise() - params.get("input.shift").row(0)).array().rowwise() * params.get("input.scale").row(0).array();
  if (cfg.phase_features) {
    const double amp = std::sqrt(static_cast<double>(cfg.input_dim));
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      x(t, cfg.input_dim) = amp * std::cos(phases[static_cast<std::size_t>(t)]);
      x(t, cfg.input_dim + 1) = amp * std::sin(phases[static_cast<std::size_t>(t)]);
    }
  }

  ad::Var h = ad::add_row(ad::matmul(graph.leaf(std::move(x), false), P("input.weight")), P("input.bias"));
  for (int i = 0; i < cfg.num_layers; ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    const ad::Var u = ad::layer_norm(h, P(p + "ln1.gain"), P(p + "ln1.bias"));
    const ad::Var q = ad::matmul(u, P(p + "attn.wq"));
    const ad::Var k = ad::matmul(u, P(p + "attn.wk"));
    const ad::Var v = ad::matmul(u, P(p + "attn.wv"));
    const ad::Var a_logit = ad::softplus(P(p + "attn.alpha_logit"));
    const ad::Var a_val = ad::softplus(P(p + "attn.alpha_val"));
    const ad::Var att = ad::phase_attention(q, k, v, phases, cfg.num_heads, contacts, a_logit, a_val);
    h = ad::add(h, ad::matmul(att, P(p + "attn.wo")));
    const ad::Var u2 = ad::layer_norm(h, P(p + "ln2.gain"), P(p + "ln2.bias"));
    const ad::Var f = ad::gelu(ad::add_row(ad::matmul(u2, P(p + "ff.w1")), P(p + "ff.b1")));
    h = ad::add(h, ad::add_row(ad::matmul(f, P(p + "ff.w2")), P(p + "ff.b2")));
  }
  EncoderGraph out;
  out.hidden = ad::layer_norm(h, P("final_ln.gain"), P("final_ln.bias"));
  const ad::Var pooled = ad::mean_rows(out.hidden);
  out.embedding = ad::l2_normalize_rows(ad::add_row(ad::matmul(pooled, P("proj.weight")), P("proj.bias")));
  out.onset = ad::softplus(ad::add_row(ad::matmul(out.hidden, P("onset_head.weight")), P("onset_head.bias")));
  out.contact = ad::sigmoid(ad::add_row(ad::matmul(out.hidden, P("contact_head.weight")), P("contact_head.bias")));
  return out;
}

}  // namespace

EncoderGraph encode(ad::Graph& graph, const BoundParams& bound, const ModelParams& params, const EncoderConfig& cfg,
                    const Matrix& tokens, const BeatGrid& grid, const std::vector<double>* contacts) {
  if (tokens.cols() != cfg.input_dim) {
    throw ShapeError("tokens: expected " + std::to_string(cfg.input_dim) + " columns, got " +
                     std::to_string(tokens.cols()));
  }
  if (tokens.rows() != grid.num_beats) throw ShapeError("tokens: row count differs from grid beat count");
  if (grid.bar_len != cfg.bar_len) throw ShapeError("grid: bar length differs from encoder config");
  if (bound.vars.size() != params.tensors.size()) throw ShapeError("params: bound variables do not match tensors");
  if (contacts && contacts->size() != static_cast<std::size_t>(grid.num_beats)) {
    throw ShapeError("contacts: expected one value per beat");
  }
  if (!cfg.contact_guided) return encode_pass(graph, bound, params, cfg, tokens, grid, nullptr);
  if (contacts) return encode_pass(graph, bound, params, cfg, tokens, grid, contacts);

  // Predict contacts with a contact-free pass, then attend with them held fixed.
  ad::Graph scratch;
  const BoundParams frozen = bind_params(scratch, params, false);
  const EncoderGraph first = encode_pass(scratch, frozen, params, cfg, tokens, grid, nullptr);
  const Matrix& pred = first.contact.value();
  const std::vector<double> predicted(pred.data(), pred.data() + pred.size());
  return encode_pass(graph, bound, params, cfg, tokens, grid, &predicted);
}

EncoderResult encoder_forward(const Matrix& tokens, const BeatGrid& grid, const std::vector<double>* contacts,
                              const ModelParams& params, const EncoderConfig& cfg) {
  ad::Graph graph;
  const BoundParams bound = bind_params(graph, params, false);
  const EncoderGraph g = encode(graph, bound, params, cfg, tokens, grid, contacts);
  EncoderResult r;
  r.hidden = g.hidden.value();
  r.embedding = g.embedding.value().row(0);
  const Matrix& on = g.onset.value();
  const Matrix& ct = g.contact.value();
  r.onset.assign(on.data(), on.data() + on.size());
  r.contact.assign(ct.data(), ct.data() + ct.size());
  return r;
}

MotionBeatModel init_model(const EncoderConfig& audio_cfg, const EncoderConfig& motion_cfg, std::uint64_t seed) {
  MotionBeatModel m;
  m.audio_config = audio_cfg;
  m.motion_config = motion_cfg;
  m.audio = init_encoder_params(audio_cfg, seed * 2 + 1);
  m.motion = init_encoder_params(motion_cfg, seed * 2 + 2);
  return m;
}

}  // namespace motionbeat
