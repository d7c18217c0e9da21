// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "motionbeat/align.hpp"
#include "motionbeat/attention.hpp"
#include "motionbeat/checkpoint.hpp"
#include "motionbeat/config.hpp"
#include "motionbeat/metrics.hpp"
#include "motionbeat/objectives.hpp"
#include "motionbeat/rng.hpp"
#include "motionbeat/synthetic.hpp"
#include "motionbeat/trainer.hpp"
#include "oracles.hpp"

using namespace motionbeat;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
  std::vector<double> v = random_vec(rng, n, 0.0, 1.0);
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (double& x : v) x /= s;
  return v;
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

Matrix unit_rows(Matrix m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r).normalize();
  return m;
}

RunConfig grad_check_config() {
  RunConfig cfg = tiny_run_config();
  for (EncoderSettings* e : {&cfg.audio_encoder, &cfg.motion_encoder}) {
    e->hidden_dim = 16;
    e->num_heads = 2;
    e->embed_dim = 8;
  }
  cfg.batch_size = 4;
  cfg.negatives.tempo_count = 2;
  cfg.negatives.bpm_tolerance = 0.5;
  return cfg;
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("criterion %d: %s | %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void criterion1() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double dtw_err = 0.0;
  for (int n = 0; n < 100; ++n) {
    const auto a = random_vec(rng, 1 + rng.uniform_int(6), -1.0, 1.0);
    const auto b = random_vec(rng, 1 + rng.uniform_int(6), -1.0, 1.0);
    dtw_err = std::max(dtw_err, std::fabs(soft_dtw(a, b, {1e-3}).value - oracle::dtw(a, b)));
  }
  double emd_err = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const std::size_t k = 1 + rng.uniform_int(8);
    const auto p = random_simplex(rng, k);
    const auto q = random_simplex(rng, k);
    emd_err = std::max(emd_err, std::fabs(emd_1d(p, q).value - oracle::emd(p, q)));
  }
  const double secs = seconds_since(t0);
  report(1, dtw_err <= 1e-2 && emd_err <= 1e-9 && secs < 10.0,
         fmt("softdtw(1e-3) vs dtw max err %.3g (<=1e-2); ", dtw_err) + fmt("emd max err %.3g (<=1e-9); ", emd_err) +
             fmt("%.2fs (<10s)", secs));
}

double rel(double a, double b) { return std::fabs(a - b) / (std::fabs(a) + std::fabs(b) + 1e-8); }

void criterion2() {
  const auto t0 = Clock::now();
  Rng rng(202);
  double dtw_worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    auto a = random_vec(rng, 1 + rng.uniform_int(8), -1.0, 1.0);
    auto b = random_vec(rng, 1 + rng.uniform_int(8), -1.0, 1.0);
    const AlignmentResult r = soft_dtw(a, b);
    const double h = 1e-4;
    for (int side = 0; side < 2; ++side) {
      auto& x = side ? b : a;
      const auto& g = side ? r.grad_b : r.grad_a;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double up = soft_dtw(a, b).value;
        x[i] = x0 - h;
        const double dn = soft_dtw(a, b).value;
        x[i] = x0;
        dtw_worst = std::max(dtw_worst, rel(g[i], (up - dn) / (2 * h)));
      }
    }
  }
  double emd_worst = 0.0;
  int emd_checked = 0;
  while (emd_checked < 100) {
    const std::size_t k = 2 + rng.uniform_int(7);
    auto p = random_simplex(rng, k);
    auto q = random_simplex(rng, k);
    const double h = 1e-3;
    double cp = 0, cq = 0, gap = 1;
    bool positive = true;
    for (std::size_t i = 0; i < k; ++i) positive = positive && p[i] > 2 * h;
    for (std::size_t i = 0; i + 1 < k; ++i) gap = std::min(gap, std::fabs((cp += p[i]) - (cq += q[i])));
    if (gap < 10 * h || !positive) continue;
    ++emd_checked;
    const AlignmentResult r = emd_1d(p, q);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        if (i == j) continue;
        auto up = p, dn = p;
        up[i] += h, up[j] -= h, dn[i] -= h, dn[j] += h;
        const double fd = (emd_1d(up, q).value - emd_1d(dn, q).value) / (2 * h);
        emd_worst = std::max(emd_worst, rel(r.grad_a[i] - r.grad_a[j], fd));
      }
    }
  }

  DatasetSpec spec = default_dataset_spec();
  spec.base.num_beats = 8;
  spec.base.seed = 11;
  const Dataset data = generate_dataset(spec, 6);
  RunConfig cfg = grad_check_config();
  const std::vector<int> all{0, 1, 2, 3, 4, 5};
  const MotionBeatModel model = initial_model(cfg, data, all);
  const BatchPlan plan = plan_batch(model, data, {0, 1, 2, 3}, all, cfg, 5);
  const BatchLoss analytic = batch_loss(model, data, plan, cfg, true);
  MotionBeatModel work = model;
  double model_worst = 0.0;
  int sampled = 0;
  Rng pick(303);
  while (sampled < 200) {
    const bool motion = pick.uniform() < 0.5;
    ModelParams& p = motion ? work.motion : work.audio;
    const std::size_t t = pick.uniform_int(p.tensors.size());
    if (!p.tensors[t].trainable) continue;
    const auto idx = static_cast<Eigen::Index>(pick.uniform_int(static_cast<std::uint64_t>(p.tensors[t].value.size())));
    double& x = p.tensors[t].value.data()[idx];
    const double x0 = x, h = 1e-4;
    x = x0 + h;
    const double up = batch_loss(work, data, plan, cfg, false).total;
    x = x0 - h;
    const double dn = batch_loss(work, data, plan, cfg, false).total;
    x = x0;
    const double ad = (motion ? analytic.grads.motion : analytic.grads.audio)[t].data()[idx];
    model_worst = std::max(model_worst, rel(ad, (up - dn) / (2 * h)));
    ++sampled;
  }
  const double secs = seconds_since(t0);
  report(2, dtw_worst < 1e-4 && emd_worst < 1e-4 && model_worst < 1e-3 && secs < 120.0,
         fmt("softdtw grad rel err %.3g (<1e-4); ", dtw_worst) + fmt("emd %.3g (<1e-4); ", emd_worst) +
             fmt("model (200 params) %.3g (<1e-3); ", model_worst) + fmt("%.1fs (<120s)", secs));
}

void criterion3() {
  Rng rng(404);
  double norm_err = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const auto v = random_vec(rng, 2 * (1 + rng.uniform_int(32)), -3.0, 3.0);
    const auto r = phase_rotate(v, rng.uniform(-10.0, 10.0));
    double a = 0, b = 0;
    for (std::size_t i = 0; i < v.size(); ++i) a += v[i] * v[i], b += r[i] * r[i];
    norm_err = std::max(norm_err, std::fabs(std::sqrt(a) - std::sqrt(b)));
  }
  double logit_err = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const auto q = random_vec(rng, 8, -1.0, 1.0);
    const auto k = random_vec(rng, 8, -1.0, 1.0);
    const double pq = rng.uniform(0, 6.3), pk = rng.uniform(0, 6.3), d = rng.uniform(-6.3, 6.3);
    auto dot = [](const std::vector<double>& x, const std::vector<double>& y) {
      return std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
    };
    logit_err = std::max(logit_err, std::fabs(dot(phase_rotate(q, pq + d), phase_rotate(k, pk + d)) -
                                              dot(phase_rotate(q, pq), phase_rotate(k, pk))));
  }
  DatasetSpec spec = default_dataset_spec();
  spec.base.seed = 21;
  const Dataset data = generate_dataset(spec, 3);
  double shift_err = 0.0;
  for (bool phase : {false, true}) {
    RunConfig cfg = tiny_run_config();
    cfg.audio_encoder.phase_features = cfg.motion_encoder.phase_features = phase;
    const MotionBeatModel m = initial_model(cfg, data, std::vector<int>{0, 1, 2});
    for (const Clip& c : data) {
      for (const TokenSequence* s : {&c.audio, &c.motion}) {
        const bool motion = s->modality == Modality::motion;
        const ModelParams& p = motion ? m.motion : m.audio;
        const EncoderConfig& ec = motion ? m.motion_config : m.audio_config;
        const TokenSequence shifted = beat_shift(*s, s->grid.bar_len);
        const auto* r0 = motion ? &s->annotation.contact_pulse : nullptr;
        const auto* r1 = motion ? &shifted.annotation.contact_pulse : nullptr;
        const RowVector z0 = encoder_forward(s->tokens, s->grid, r0, p, ec).embedding;
        const RowVector z1 = encoder_forward(shifted.tokens, shifted.grid, r1, p, ec).embedding;
        shift_err = std::max(shift_err, (z0 - z1).cwiseAbs().maxCoeff());
      }
    }
  }
  double vanilla_err = 0.0;
  for (int n = 0; n < 100; ++n) {
    const Eigen::Index K = 2 + static_cast<Eigen::Index>(rng.uniform_int(10));
    const Matrix q = random_matrix(rng, K, 8), k = random_matrix(rng, K, 8), v = random_matrix(rng, K, 8);
    const auto r = random_vec(rng, static_cast<std::size_t>(K), 0.0, 1.0);
    const AttentionOutput out = contact_attention(q, k, v, r, 0.0, 0.0);
    vanilla_err = std::max(vanilla_err, (out.output - oracle::attention(q, k, v)).cwiseAbs().maxCoeff());
  }
  report(3, norm_err <= 1e-12 && logit_err <= 1e-9 && shift_err <= 1e-5 && vanilla_err <= 1e-9,
         fmt("rotation norm err %.3g (<=1e-12); ", norm_err) + fmt("relative-phase logit err %.3g (<=1e-9); ", logit_err) +
             fmt("bar-shift embedding err %.3g (<=1e-5); ", shift_err) +
             fmt("alpha=0 vs vanilla %.3g (<=1e-9)", vanilla_err));
}

void criterion4() {
  Rng rng(505);
  double nce_err = 0.0;
  for (int n = 0; n < 50; ++n) {
    const int N = 2 + static_cast<int>(rng.uniform_int(15));
    const Matrix za = unit_rows(random_matrix(rng, N, 16)), zm = unit_rows(random_matrix(rng, N, 16));
    const double tau = rng.uniform(0.05, 1.0);
    const auto negs = in_batch_negatives(N);
    nce_err = std::max(nce_err, std::fabs(ecl_loss(za, zm, negs, tau).value - oracle::info_nce(za, zm, tau)));
  }
  const Matrix eye = Matrix::Identity(2, 2);
  const EclResult two = ecl_loss(eye, eye, in_batch_negatives(2), 1.0);
  const double expected = std::log(1.0 + std::exp(-1.0));
  double hand_err = 0.0;
  for (double v : two.per_anchor) hand_err = std::max(hand_err, std::fabs(v - expected));

  double lin_err = 0.0;
  for (int n = 0; n < 100; ++n) {
    const double e = rng.uniform(0, 5), s = rng.uniform(-3, 3), a = rng.uniform(0, 1);
    lin_err = std::max(lin_err, std::fabs(total_loss(e, s, a) - (e + a * s)));
  }
  DatasetSpec spec = default_dataset_spec();
  spec.base.num_beats = 8;
  spec.base.seed = 31;
  const Dataset data = generate_dataset(spec, 4);
  RunConfig cfg = grad_check_config();
  cfg.aux_weight = 0.0;
  const std::vector<int> all{0, 1, 2, 3};
  const MotionBeatModel model = initial_model(cfg, data, all);
  const BatchPlan plan = plan_batch(model, data, all, all, cfg, 9);
  auto grads_at = [&](double alpha) {
    RunConfig c = cfg;
    c.loss.alpha = alpha;
    return batch_loss(model, data, plan, c, true);
  };
  const BatchLoss g0 = grads_at(0.0), g1 = grads_at(0.2);
  double grad_lin = 0.0;
  for (std::size_t t = 0; t < g0.grads.motion.size(); ++t) {
    // alpha = 0.2 gradient recombined from the pure ECL and pure SRAL parts
    RunConfig c = cfg;
    c.loss.alpha = 1.0;
    const BatchLoss g_one = batch_loss(model, data, plan, c, true);
    const Matrix sral_part = g_one.grads.motion[t] - g0.grads.motion[t];
    grad_lin = std::max(grad_lin, (g1.grads.motion[t] - (g0.grads.motion[t] + 0.2 * sral_part)).cwiseAbs().maxCoeff());
    if (t > 3) break;
  }
  lin_err = std::max(lin_err, std::fabs(g1.total - (g0.total + 0.2 * g1.sral)));
  report(4, nce_err <= 1e-9 && hand_err <= 1e-6 && lin_err <= 1e-9 && grad_lin <= 1e-9,
         fmt("in-batch ECL vs InfoNCE err %.3g (<=1e-9); ", nce_err) +
             fmt("N=2 orthogonal tau=1 per-anchor %.6f (0.3133, <=1e-6); ", two.per_anchor[0]) +
             fmt("total linearity err %.3g (<=1e-9); ", lin_err) + fmt("gradient linearity err %.3g (<=1e-9)", grad_lin));
}

struct DeskRun {
  double r1 = 0.0;
  double jitter = 0.0;
};

void criterion5() {
  const auto t0 = Clock::now();
  const DatasetSpec spec = load_dataset_spec(MOTIONBEAT_CONFIG_DIR "/synthetic_200.json");
  const Dataset data = generate_dataset(spec, 200);
  const DatasetSplit split = split_dataset(200, 0);
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  auto run = [&](const RunConfig& base, std::uint64_t seed) {
    RunConfig cfg = base;
    cfg.seed = seed;
    const TrainResult r = train(cfg, data, split);
    const Embeddings e = embed_clips(r.model, data, split.test);
    DeskRun out;
    out.r1 = eval_retrieval(e.audio, e.motion, RetrievalDirection::music_to_motion).recall_at.at(1);
    out.jitter = 100.0 * jitter_discrimination(r.model, data, split.test);
    return out;
  };
  RunConfig full = tiny_run_config();
  RunConfig ablation = full;
  ablation.loss.alpha = 0.0;
  ablation.negatives.tempo_count = 0;
  ablation.negatives.beat_jitter = false;
  double full_r1 = 0, abl_r1 = 0, jit = 0;
  std::string per_seed;
  for (std::uint64_t s : seeds) {
    const DeskRun f = run(full, s), a = run(ablation, s);
    full_r1 += f.r1 / seeds.size();
    abl_r1 += a.r1 / seeds.size();
    jit += f.jitter / seeds.size();
    per_seed += " seed" + std::to_string(s) + fmt(" full %.0f", f.r1) + fmt("/abl %.0f", a.r1) + fmt("/jit %.0f", f.jitter);
  }
  const double secs = seconds_since(t0);
  const bool a_ok = full_r1 >= 50.0, b_ok = full_r1 - abl_r1 >= 5.0, c_ok = jit >= 80.0;
  report(5, a_ok && b_ok && c_ok && secs < 900.0,
         fmt("(a) test R@1 %.1f%% (>=50, chance 5); ", full_r1) +
             fmt("(b) full - ablation %.1f pts (>=5); ", full_r1 - abl_r1) +
             fmt("(c) true pair beats +-1 beat jitter on %.1f%% (>=80); ", jit) + fmt("%.0fs (<900s);", secs) +
             " mean of 3 seeds, 200 pairs, 30 epochs;" + per_seed);
}

void criterion6() {
  DatasetSpec spec = default_dataset_spec();
  spec.base.seed = 61;
  spec.base.feature_noise_std = 0.0;
  const LossWeights w;
  double bar_zero = 0.0;
  std::vector<double> means;
  for (double lag : {0.0, 0.1, 0.2, 0.3}) {
    spec.base.contact_lag_std = lag;
    double sum = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Clip c = generate_dataset_pair(spec, i).clip;
      const SralResult s = sral_from_annotations(c, w);
      if (lag == 0.0) bar_zero = std::max(bar_zero, std::fabs(s.bar_term));
      sum += s.value / 100.0;
    }
    means.push_back(sum);
  }
  bool increasing = true;
  for (std::size_t i = 1; i < means.size(); ++i) increasing = increasing && means[i] > means[i - 1];
  std::string trail;
  for (double m : means) trail += fmt(" %.5f", m);
  report(6, bar_zero <= 1e-9 && increasing,
         fmt("noiseless bar term max %.3g (<=1e-9); ", bar_zero) + "mean SRAL at lag {0,.1,.2,.3}:" + trail +
             (increasing ? " (strictly increasing)" : " (NOT strictly increasing)"));
}

void criterion7() {
  DatasetSpec spec = default_dataset_spec();
  spec.base.seed = 71;
  const Dataset data = generate_dataset(spec, 64);
  const DatasetSplit split = split_dataset(64, 0);
  RunConfig cfg = tiny_run_config();
  cfg.max_epochs = 2;
  cfg.seed = 5;
  const std::string a = serialize_checkpoint(train(cfg, data, split).model);
  const std::string b = serialize_checkpoint(train(cfg, data, split).model);
  const bool same = a == b;
  const bool round = serialize_checkpoint(deserialize_checkpoint(a)) == a;

  Rng rng(707);
  bool ranks_ok = true;
  for (int n = 0; n < 50; ++n) {
    const int N = 10 + static_cast<int>(rng.uniform_int(40));
    Matrix sim(N, N);
    for (Eigen::Index i = 0; i < sim.size(); ++i) sim.data()[i] = std::round(rng.uniform(-4, 4)) / 4.0;  // many ties
    for (RetrievalDirection d : {RetrievalDirection::music_to_motion, RetrievalDirection::motion_to_music}) {
      const RetrievalReport r = retrieval_from_similarity(sim, d);
      const auto ref = oracle::ranks(sim);
      ranks_ok = ranks_ok && r.ranks == ref && r.median_rank == oracle::median(ref);
      for (int k : {1, 5, 10}) {
        const double hits = static_cast<double>(std::count_if(ref.begin(), ref.end(), [k](int x) { return x <= k; }));
        ranks_ok = ranks_ok && r.recall_at.at(k) == 100.0 * hits / N;
      }
    }
  }
  report(7, same && round && ranks_ok,
         std::string("same config+seed checkpoints ") + (same ? "byte-identical" : "DIFFER") + "; round-trip " +
             (round ? "byte-identical" : "DIFFERS") + "; retrieval vs independent ranking " +
             (ranks_ok ? "exact on 50 tie-heavy matrices" : "MISMATCH"));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                    criterion5, criterion6, criterion7};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i) + 1, false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
