#include "motionbeat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <ostream>

#include "motionbeat/checkpoint.hpp"
#include "motionbeat/errors.hpp"
#include "motionbeat/rng.hpp"

namespace motionbeat {

namespace {

const std::vector<double>* contacts_of(const TokenSequence& motion) {
  return motion.annotation.contact_pulse.empty() ? nullptr : &motion.annotation.contact_pulse;
}

std::vector<double> column(const Matrix& m) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, 0);
  return out;
}

Matrix as_column(std::span<const double> v, double scale) {
  Matrix out(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i), 0) = scale * v[i];
  return out;
}

void set_standardization(ModelParams& params, const Dataset& data, std::span<const int> train, bool audio) {
  Matrix& shift = params.get("input.shift");
  Matrix& scale = params.get("input.scale");
  const Eigen::Index D = shift.cols();
  RowVector sum = RowVector::Zero(D);
  RowVector sq = RowVector::Zero(D);
  double n = 0.0;
  for (int i : train) {
    const Matrix& t = audio ? data[static_cast<std::size_t>(i)].audio.tokens : data[static_cast<std::size_t>(i)].motion.tokens;
    if (t.cols() != D) throw ShapeError("token width differs between clips");
    sum += t.colwise().sum();
    sq += t.array().square().matrix().colwise().sum();
    n += static_cast<double>(t.rows());
  }
  if (n < 2.0) return;
  const RowVector mean = sum / n;
  for (Eigen::Index j = 0; j < D; ++j) {
    const double var = std::max(0.0, sq(j) / n - mean(j) * mean(j));
    shift(0, j) = mean(j);
    scale(0, j) = 1.0 / std::max(std::sqrt(var), 1e-6);
  }
}

}  // namespace

MotionBeatModel initial_model(const RunConfig& config, const Dataset& data, std::span<const int> train) {
  if (data.empty()) throw DomainError("dataset is empty");
  const Clip& first = data.front();
  const int bar_len = first.audio.grid.bar_len;
  const EncoderConfig ac = config.audio_encoder.resolve(first.audio.dim(), bar_len, false);
  const EncoderConfig mc = config.motion_encoder.resolve(first.motion.dim(), bar_len, config.contact_guided);
  MotionBeatModel model = init_model(ac, mc, config.seed);
  set_standardization(model.audio, data, train, true);
  set_standardization(model.motion, data, train, false);
  return model;
}

BatchPlan plan_batch(const MotionBeatModel& model, const Dataset& data, std::vector<int> clips,
                     std::span<const int> pool, const RunConfig& config, std::uint64_t seed) {
  BatchPlan plan;
  plan.clips = std::move(clips);
  std::vector<ClipMeta> pool_meta;
  pool_meta.reserve(pool.size());
  for (int i : pool) pool_meta.push_back(data[static_cast<std::size_t>(i)].meta);
  std::map<int, RowVector> cache;
  const int d = model.motion_config.embed_dim;
  for (std::size_t b = 0; b < plan.clips.size(); ++b) {
    const Clip& anchor = data[static_cast<std::size_t>(plan.clips[b])];
    NegativeSet neg;
    for (std::size_t o = 0; o < plan.clips.size(); ++o) {
      if (o != b) neg.batch.push_back(static_cast<int>(o));
    }
    neg.tempo = Matrix(0, d);
    neg.jitter = Matrix(0, d);
    if (config.negatives.tempo_count > 0) {
      const TempoMining mined = mine_tempo_negatives(anchor.meta, pool_meta, config.negatives.tempo_count,
                                                     config.negatives.bpm_tolerance, mix64(seed + b));
      neg.tempo = Matrix(static_cast<Eigen::Index>(mined.indices.size()), d);
      for (std::size_t r = 0; r < mined.indices.size(); ++r) {
        const int idx = pool[static_cast<std::size_t>(mined.indices[r])];
        auto it = cache.find(idx);
        if (it == cache.end()) {
          const Clip& c = data[static_cast<std::size_t>(idx)];
          it = cache.emplace(idx, encoder_forward(c.motion.tokens, c.motion.grid, contacts_of(c.motion), model.motion,
                                                  model.motion_config)
                                      .embedding)
                   .first;
        }
        neg.tempo.row(static_cast<Eigen::Index>(r)) = it->second;
        neg.tempo_indices.push_back(idx);
      }
    }
    if (config.negatives.beat_jitter) neg.jitter = make_beat_jitter_negatives(anchor.motion, model);
    plan.negatives.push_back(std::move(neg));
  }
  return plan;
}

BatchLoss batch_loss(const MotionBeatModel& model, const Dataset& data, const BatchPlan& plan,
                     const RunConfig& config, bool with_grads) {
  const std::size_t N = plan.clips.size();
  if (N < 2) throw DomainError("a batch needs at least 2 clips");
  ad::Graph g;
  const BoundParams ba = bind_params(g, model.audio, with_grads);
  const BoundParams bm = bind_params(g, model.motion, with_grads);
  std::vector<EncoderGraph> ea, em;
  ea.reserve(N);
  em.reserve(N);
  for (int idx : plan.clips) {
    const Clip& c = data[static_cast<std::size_t>(idx)];
    ea.push_back(encode(g, ba, model.audio, model.audio_config, c.audio.tokens, c.audio.grid, nullptr));
    em.push_back(encode(g, bm, model.motion, model.motion_config, c.motion.tokens, c.motion.grid, contacts_of(c.motion)));
  }
  const int d = model.audio_config.embed_dim;
  Matrix A(static_cast<Eigen::Index>(N), d), M(static_cast<Eigen::Index>(N), d);
  for (std::size_t i = 0; i < N; ++i) {
    A.row(static_cast<Eigen::Index>(i)) = ea[i].embedding.value().row(0);
    M.row(static_cast<Eigen::Index>(i)) = em[i].embedding.value().row(0);
  }
  const EclResult ecl = ecl_loss(A, M, plan.negatives, config.loss.tau, config.symmetric_ecl);

  // Jitter negatives re-encoded on the graph so they receive d loss / d z_jitter.
  std::vector<std::pair<ad::Var, Matrix>> seeds;
  if (config.negatives.jitter_gradient && config.negatives.beat_jitter && with_grads) {
    const double tau = config.loss.tau;
    const double dir_weight = config.symmetric_ecl ? 0.5 : 1.0;
    for (std::size_t i = 0; i < N; ++i) {
      const Clip& c = data[static_cast<std::size_t>(plan.clips[i])];
      const auto row = static_cast<Eigen::Index>(i);
      const double log_d = ecl.per_anchor[i] + A.row(row).dot(M.row(row)) / tau;
      for (int delta : {+1, -1}) {
        const TokenSequence shifted = beat_shift(c.motion, delta);
        const EncoderGraph ej =
            encode(g, bm, model.motion, model.motion_config, shifted.tokens, shifted.grid, contacts_of(shifted));
        const RowVector zj = ej.embedding.value().row(0);
        const double p = std::exp(A.row(row).dot(zj) / tau - log_d);
        seeds.emplace_back(ej.embedding, Matrix(A.row(row) * (dir_weight * p / (tau * static_cast<double>(N)))));
      }
    }
  }

  BatchLoss out;
  out.ecl = ecl.value;
  const SoftDtwConfig dtw{config.soft_dtw_gamma};
  const double inv_n = 1.0 / static_cast<double>(N);
  for (std::size_t i = 0; i < N; ++i) {
    const Clip& c = data[static_cast<std::size_t>(plan.clips[i])];
    seeds.emplace_back(ea[i].embedding, ecl.grad_anchors.row(static_cast<Eigen::Index>(i)));
    seeds.emplace_back(em[i].embedding, ecl.grad_positives.row(static_cast<Eigen::Index>(i)));
    const std::vector<double> onset = column(ea[i].onset.value());
    const std::vector<double> contact = column(em[i].contact.value());

    Matrix onset_seed = Matrix::Zero(static_cast<Eigen::Index>(onset.size()), 1);
    Matrix contact_seed = Matrix::Zero(static_cast<Eigen::Index>(contact.size()), 1);
    if (config.sral_source == SralSource::pred) {
      const SralResult s = sral_from_predictions(onset, contact, c.audio.grid, config.loss, dtw);
      out.sral += inv_n * s.value;
      onset_seed += as_column(s.grad_onset, config.loss.alpha * inv_n);
      contact_seed += as_column(s.grad_contact, config.loss.alpha * inv_n);
    } else {
      out.sral += inv_n * sral_from_annotations(c, config.loss, dtw).value;
    }
    if (config.aux_weight > 0.0) {
      const ScalarLoss mse = mean_squared_error(onset, c.audio.annotation.onset_envelope);
      const ScalarLoss bce = binary_cross_entropy(contact, c.motion.annotation.contact_pulse);
      out.aux += inv_n * (mse.value + bce.value);
      onset_seed += as_column(mse.grad, config.aux_weight * inv_n);
      contact_seed += as_column(bce.grad, config.aux_weight * inv_n);
    }
    seeds.emplace_back(ea[i].onset, std::move(onset_seed));
    seeds.emplace_back(em[i].contact, std::move(contact_seed));
  }
  out.total = total_loss(out.ecl, out.sral, config.loss.alpha) + config.aux_weight * out.aux;
  if (with_grads) {
    g.backward(seeds);
    for (const ad::Var& v : ba.vars) out.grads.audio.push_back(g.grad(v.id));
    for (const ad::Var& v : bm.vars) out.grads.motion.push_back(g.grad(v.id));
  }
  return out;
}

Embeddings embed_clips(const MotionBeatModel& model, const Dataset& data, std::span<const int> indices) {
  Embeddings e;
  const auto n = static_cast<Eigen::Index>(indices.size());
  e.audio = Matrix(n, model.audio_config.embed_dim);
  e.motion = Matrix(n, model.motion_config.embed_dim);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Clip& c = data[static_cast<std::size_t>(indices[static_cast<std::size_t>(r)])];
    e.audio.row(r) = encoder_forward(c.audio.tokens, c.audio.grid, nullptr, model.audio, model.audio_config).embedding;
    e.motion.row(r) =
        encoder_forward(c.motion.tokens, c.motion.grid, contacts_of(c.motion), model.motion, model.motion_config)
            .embedding;
  }
  return e;
}

double jitter_discrimination(const MotionBeatModel& model, const Dataset& data, std::span<const int> indices) {
  if (indices.empty()) throw DomainError("jitter_discrimination: no clips");
  const Embeddings e = embed_clips(model, data, indices);
  int wins = 0;
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Clip& c = data[static_cast<std::size_t>(indices[r])];
    const Matrix jit = make_beat_jitter_negatives(c.motion, model);
    const RowVector za = e.audio.row(static_cast<Eigen::Index>(r));
    const double s_true = za.dot(e.motion.row(static_cast<Eigen::Index>(r)));
    if (s_true > za.dot(jit.row(0)) && s_true > za.dot(jit.row(1))) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(indices.size());
}

std::string epoch_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["ecl"] = r.ecl;
  j["sral"] = r.sral;
  j["val_r_at_1"] = r.val_r_at_1;
  return j.dump();
}

TrainResult train(const RunConfig& config, const Dataset& data, const DatasetSplit& split,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (static_cast<int>(split.train.size()) < config.batch_size) {
    throw ConfigError("training split has " + std::to_string(split.train.size()) + " pairs, fewer than batch_size " +
                      std::to_string(config.batch_size));
  }
  if (split.val.empty()) throw ConfigError("validation split is empty");
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    for (int i : *part) {
      if (i < 0 || static_cast<std::size_t>(i) >= data.size()) throw DomainError("split index out of range");
    }
  }

  MotionBeatModel model = initial_model(config, data, split.train);
  AdamWState audio_state, motion_state;
  TrainResult result;
  result.model = model;
  std::vector<int> order = split.train;
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    order = split.train;
    Rng rng(mix64(config.seed ^ (0x5851f42d4c957f2dULL * static_cast<std::uint64_t>(epoch))));
    rng.shuffle(order);
    EpochRecord rec;
    rec.epoch = epoch;
    int steps = 0;
    const std::size_t B = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0; start + 1 < order.size(); start += B) {
      const std::size_t stop = std::min(order.size(), start + B);
      if (stop - start < 2) break;
      std::vector<int> clips(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
      const std::uint64_t step_seed = mix64(config.seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(epoch) * 100003u + start));
      const BatchPlan plan = plan_batch(model, data, std::move(clips), split.train, config, step_seed);
      const BatchLoss loss = batch_loss(model, data, plan, config, true);
      if (!std::isfinite(loss.total)) throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
      adamw_step(model.audio.tensors, loss.grads.audio, audio_state, config.optimizer);
      adamw_step(model.motion.tensors, loss.grads.motion, motion_state, config.optimizer);
      rec.train_loss += loss.total;
      rec.ecl += loss.ecl;
      rec.sral += loss.sral;
      ++steps;
    }
    if (steps > 0) {
      rec.train_loss /= steps;
      rec.ecl /= steps;
      rec.sral /= steps;
    }
    const Embeddings val = embed_clips(model, data, split.val);
    rec.val_r_at_1 = eval_retrieval(val.audio, val.motion, RetrievalDirection::music_to_motion).recall_at.at(1);
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_r_at_1 > result.best_val_r_at_1) {
      result.best_val_r_at_1 = rec.val_r_at_1;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

TrainResult train_from_files(const RunConfig& config, std::ostream* progress) {
  config.validate();
  if (config.dataset.empty()) throw ConfigError("config has no dataset path");
  if (config.output_dir.empty()) throw ConfigError("config has no output_dir");
  if (!std::filesystem::exists(config.dataset)) throw ConfigError("dataset file not found: " + config.dataset);
  const Dataset data = read_dataset(config.dataset);
  const DatasetSplit split = split_dataset(static_cast<int>(data.size()), config.split_seed);
  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);
  std::ofstream metrics(dir / "metrics.jsonl", std::ios::app);
  if (!metrics) throw std::runtime_error("cannot write " + (dir / "metrics.jsonl").string());
  TrainResult r = train(config, data, split, [&](const EpochRecord& rec) {
    metrics << epoch_json(rec) << '\n';
    metrics.flush();
    if (progress) {
      *progress << "epoch " << rec.epoch << " train_loss " << rec.train_loss << " ecl " << rec.ecl << " sral "
                << rec.sral << " val_r_at_1 " << rec.val_r_at_1 << '\n';
    }
  });
  save_checkpoint(dir / "checkpoint.bin", r.model);
  return r;
}

GradCheckReport grad_check_model(const MotionBeatModel& model, const Dataset& data, const BatchPlan& plan,
                                 const RunConfig& config, double h, int samples, std::uint64_t seed) {
  if (!(h > 0.0)) throw DomainError("grad_check_model: h must be > 0");
  if (samples < 1) throw DomainError("grad_check_model: samples must be >= 1");
  const BatchLoss analytic = batch_loss(model, data, plan, config, true);

  struct Slot {
    bool motion;
    std::size_t tensor;
    Eigen::Index flat;
  };
  std::vector<Slot> slots;
  for (int side = 0; side < 2; ++side) {
    const ModelParams& p = side == 0 ? model.audio : model.motion;
    for (std::size_t t = 0; t < p.tensors.size(); ++t) {
      if (!p.tensors[t].trainable) continue;
      for (Eigen::Index k = 0; k < p.tensors[t].value.size(); ++k) slots.push_back({side == 1, t, k});
    }
  }
  Rng rng(seed);
  GradCheckReport report;
  MotionBeatModel work = model;
  for (int s = 0; s < samples; ++s) {
    const Slot slot = slots[static_cast<std::size_t>(rng.uniform_int(slots.size()))];
    ModelParams& wp = slot.motion ? work.motion : work.audio;
    double& x = wp.tensors[slot.tensor].value.data()[slot.flat];
    const double x0 = x;
    x = x0 + h;
    const double up = batch_loss(work, data, plan, config, false).total;
    x = x0 - h;
    const double down = batch_loss(work, data, plan, config, false).total;
    x = x0;
    const double fd = (up - down) / (2.0 * h);
    const Matrix& g = slot.motion ? analytic.grads.motion[slot.tensor] : analytic.grads.audio[slot.tensor];
    const double ad = g.data()[slot.flat];
    const double err = std::abs(ad - fd) / (std::abs(ad) + std::abs(fd) + 1e-8);
    ++report.checked;
    if (err > report.max_rel_error || report.worst_param.empty()) {
      report.max_rel_error = std::max(report.max_rel_error, err);
      if (err >= report.max_rel_error) {
        report.worst_param = (slot.motion ? "motion." : "audio.") + wp.tensors[slot.tensor].name + "[" +
                             std::to_string(slot.flat) + "]";
      }
    }
  }
  return report;
}

}  // namespace motionbeat
