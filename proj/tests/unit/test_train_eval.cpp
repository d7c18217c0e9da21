#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "generators.hpp"
#include "motionbeat/checkpoint.hpp"
#include "motionbeat/cli.hpp"
#include "motionbeat/config.hpp"
#include "motionbeat/dataset.hpp"
#include "motionbeat/errors.hpp"
#include "motionbeat/metrics.hpp"
#include "motionbeat/optimizer.hpp"
#include "motionbeat/synthetic.hpp"
#include "motionbeat/trainer.hpp"
#include "oracles.hpp"

using namespace motionbeat;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("motionbeat_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<NamedTensor> scalar_param(double v) {
  return {NamedTensor{"w", Matrix::Constant(1, 1, v), true}};
}

const Dataset& small_dataset() {
  static const Dataset data = [] {
    DatasetSpec spec = default_dataset_spec();
    spec.base.seed = 90;
    return generate_dataset(spec, 64);
  }();
  return data;
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("AdamW examples") {
  AdamWSettings s;
  s.weight_decay = 0.0;
  auto p = scalar_param(0.7);
  AdamWState st;
  const std::vector<Matrix> zero{Matrix::Zero(1, 1)};
  adamw_step(p, zero, st, s);
  CHECK(p[0].value(0, 0) == 0.7);

  AdamWSettings sgd{0.1, 0.0, 0.0, 0.0, 1e-8};
  auto q = scalar_param(0.0);
  AdamWState st2;
  adamw_step(q, std::vector<Matrix>{Matrix::Constant(1, 1, 1.0)}, st2, sgd);
  CHECK(q[0].value(0, 0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-14));

  AdamWSettings decay;
  decay.learning_rate = 0.05;
  decay.weight_decay = 0.01;
  auto r = scalar_param(2.0);
  AdamWState st3;
  double want = 2.0;
  for (int i = 0; i < 5; ++i) {
    adamw_step(r, zero, st3, decay);
    want *= 1.0 - 0.05 * 0.01;
    CHECK(r[0].value(0, 0) == want);  // bit-exact
  }
}

TEST_CASE("AdamW with no momentum or decay is sign descent") {
  Rng rng(1);
  AdamWSettings s{0.01, 0.0, 0.0, 0.0, 1e-12};
  for (int n = 0; n < 50; ++n) {
    std::vector<NamedTensor> p{{"a", gen::matrix(rng, 3, 4), true}};
    const Matrix before = p[0].value;
    const Matrix g = gen::matrix(rng, 3, 4);
    AdamWState st;
    adamw_step(p, std::vector<Matrix>{g}, st, s);
    CHECK((p[0].value - (before - 0.01 * g.array().sign().matrix())).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("AdamW names the tensor with a non-finite gradient and leaves frozen tensors alone") {
  std::vector<NamedTensor> p{{"fine", Matrix::Ones(1, 2), true}, {"broken", Matrix::Ones(1, 1), true},
                             {"frozen", Matrix::Ones(1, 1), false}};
  const std::vector<Matrix> g{Matrix::Ones(1, 2), Matrix::Constant(1, 1, std::nan("")), Matrix::Ones(1, 1)};
  AdamWState st;
  try {
    adamw_step(p, g, st, AdamWSettings{});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("broken") != std::string::npos);
  }
  CHECK(p[0].value == Matrix::Ones(1, 2));
  const std::vector<Matrix> ok{Matrix::Ones(1, 2), Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
  adamw_step(p, ok, st, AdamWSettings{});
  CHECK(p[2].value(0, 0) == 1.0);
  CHECK(p[0].value(0, 0) < 1.0);
  AdamWSettings bad;
  bad.learning_rate = 0.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("retrieval examples") {
  Rng rng(2);
  const Matrix z = gen::unit_rows(rng, 20, 16);
  const RetrievalReport self = eval_retrieval(z, z, RetrievalDirection::music_to_motion);
  CHECK(self.recall_at.at(1) == 100.0);
  CHECK(self.median_rank == 1.0);

  double r1 = 0.0, medr = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng r(100 + static_cast<std::uint64_t>(seed));
    const RetrievalReport rep =
        eval_retrieval(gen::unit_rows(r, 100, 512), gen::unit_rows(r, 100, 512), RetrievalDirection::music_to_motion);
    r1 += rep.recall_at.at(1) / 20;
    medr += rep.median_rank / 20;
  }
  CHECK(r1 < 5.0);
  CHECK(medr > 35.0);
  CHECK(medr < 65.0);

  Matrix s(3, 3);
  s << 0.9, 0.1, 0.2,  // rank 1
      0.8, 0.5, 0.8,   // rank 3 (tie with column 2 goes to the lower index 0 first, then 2 wins over 1)
      0.3, 0.3, 0.3;   // all tied: rank 3
  const RetrievalReport hand = retrieval_from_similarity(s, RetrievalDirection::music_to_motion, std::vector<int>{1, 2, 3});
  CHECK(hand.ranks == std::vector<int>{1, 3, 3});
  CHECK(hand.recall_at.at(1) == doctest::Approx(100.0 / 3));
  CHECK(hand.recall_at.at(2) == doctest::Approx(100.0 / 3));
  CHECK(hand.recall_at.at(3) == 100.0);
  CHECK(hand.median_rank == 3.0);
  const RetrievalReport back = retrieval_from_similarity(s, RetrievalDirection::motion_to_music, std::vector<int>{1});
  CHECK(back.ranks == hand.ranks);
  CHECK(back.direction == RetrievalDirection::motion_to_music);
  const RetrievalReport flipped = retrieval_from_similarity(s.transpose(), RetrievalDirection::motion_to_music, std::vector<int>{1});
  CHECK(flipped.ranks == std::vector<int>{1, 1, 2});

  CHECK_THROWS(eval_retrieval(z, z.leftCols(8), RetrievalDirection::music_to_motion));
  CHECK_THROWS(eval_retrieval(2.0 * z, z, RetrievalDirection::music_to_motion));
}

TEST_CASE("retrieval reports agree with an independent ranking") {
  Rng rng(3);
  for (int n = 0; n < 100; ++n) {
    const int N = static_cast<int>(gen::size(rng, 10, 40));
    const Matrix a = gen::unit_rows(rng, N, 6), m = gen::unit_rows(rng, N, 6);
    for (RetrievalDirection d : {RetrievalDirection::music_to_motion, RetrievalDirection::motion_to_music}) {
      const RetrievalReport r = eval_retrieval(a, m, d);
      const Matrix sim = d == RetrievalDirection::music_to_motion ? Matrix(a * m.transpose()) : Matrix(m * a.transpose());
      const auto ref = oracle::ranks(sim);
      CHECK(r.ranks == ref);
      CHECK(r.median_rank == oracle::median(ref));
      CHECK(r.median_rank >= 1.0);
      double prev = 0.0;
      for (const auto& [k, v] : r.recall_at) {
        CHECK(v >= prev);
        CHECK(v <= 100.0);
        prev = v;
      }
    }
  }
  const nlohmann::json j = nlohmann::json::parse(retrieval_json(eval_retrieval(
      gen::unit_rows(rng, 12, 4), gen::unit_rows(rng, 12, 4), RetrievalDirection::motion_to_music)));
  CHECK(j["direction"] == "motion_to_music");
  CHECK(j["recall_at"].contains("R@10"));
  CHECK(j["num_queries"] == 12);
}

TEST_CASE("beat alignment score") {
  const std::vector<double> beats{0.5, 2.5, 4.5, 6.5};
  CHECK(beat_alignment_score(beats, beats) == 1.0);
  std::vector<double> late = beats;
  for (double& t : late) t += 0.3;
  CHECK(beat_alignment_score(beats, late, 0.1) == doctest::Approx(std::exp(-4.5)).epsilon(1e-12));
  CHECK(beat_alignment_score(std::vector<double>{1.0}, std::vector<double>{0.8, 1.2}, 0.1) ==
        doctest::Approx(std::exp(-0.04 / 0.02)).epsilon(1e-12));
  CHECK_THROWS_AS(beat_alignment_score(std::vector<double>{}, beats), DomainError);
  Rng rng(4);
  for (int n = 0; n < 100; ++n) {
    auto a = gen::reals(rng, gen::size(rng, 1, 10), 0, 8), b = gen::reals(rng, gen::size(rng, 1, 10), 0, 8);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double v = beat_alignment_score(a, b);
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
  const std::vector<double> env{0, 1, 0, 0.5, 0.2, 0.1, 0, 2};
  const std::vector<double> bounds{0, 1, 2, 3, 4, 5, 6, 7, 8};
  CHECK(peak_beat_times(env, bounds) == std::vector<double>{1, 3, 7});
}

TEST_CASE("run config JSON") {
  RunConfig c = run_config_from_json(R"({"preset":"tiny","seed":9,"loss":{"tau":0.1,"alpha":0.3},
    "negatives":{"tempo_count":2},"sral_source":"gt","batch_size":8})");
  CHECK(c.audio_encoder.hidden_dim == 64);
  CHECK(c.seed == 9);
  CHECK(c.loss.tau == 0.1);
  CHECK(c.loss.alpha == 0.3);
  CHECK(c.negatives.tempo_count == 2);
  CHECK(c.sral_source == SralSource::gt);
  const RunConfig d = run_config_from_json(run_config_to_json(c));
  CHECK(run_config_to_json(d) == run_config_to_json(c));

  const RunConfig def = run_config_from_json("{}");
  CHECK(def.optimizer.learning_rate == 2e-4);
  CHECK(def.batch_size == 64);
  CHECK(def.max_epochs == 100);
  CHECK(def.loss.tau == 0.07);
  CHECK(def.loss.lambda_beat == 0.9);
  CHECK(def.loss.lambda_bar == 0.2);
  CHECK(def.loss.alpha == 0.2);

  try {
    run_config_from_json(R"({"loss":{"tua":1}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("loss.tua") != std::string::npos);
  }
  CHECK_THROWS_AS(run_config_from_json(R"({"batch_size":1})"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(R"({"optimizer":{"learning_rate":0}})"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json("{not json"), ConfigError);

  ::setenv("MOTIONBEAT_SEED", "77", 1);
  RunConfig env = tiny_run_config();
  apply_seed_env(env);
  CHECK(env.seed == 77);
  ::setenv("MOTIONBEAT_SEED", "x7", 1);
  CHECK_THROWS_AS(apply_seed_env(env), ConfigError);
  ::unsetenv("MOTIONBEAT_SEED");

  const DatasetSpec spec = dataset_spec_from_json(R"({"seed":3,"bpm_min":100,"bpm_max":110,"num_beats":8})");
  CHECK(spec.base.seed == 3);
  CHECK(spec.base.num_beats == 8);
  CHECK_THROWS_AS(dataset_spec_from_json(R"({"bpm":1})"), ConfigError);
}

TEST_CASE("dataset files round trip and splits partition the pairs") {
  const Dataset& data = small_dataset();
  const fs::path dir = scratch_dir("dataset");
  write_dataset(dir / "d.jsonl", data);
  const Dataset back = read_dataset(dir / "d.jsonl");
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].audio.tokens == data[i].audio.tokens);
    CHECK(back[i].motion.tokens == data[i].motion.tokens);
    CHECK(back[i].motion.annotation.contact_pulse == data[i].motion.annotation.contact_pulse);
    CHECK(back[i].audio.annotation.bar_accent_mass == data[i].audio.annotation.bar_accent_mass);
    CHECK(back[i].meta.bpm == data[i].meta.bpm);
    CHECK(back[i].audio.grid.phase_offset == data[i].audio.grid.phase_offset);
  }
  fs::remove_all(dir);

  for (int count : {10, 64, 200}) {
    const DatasetSplit s = split_dataset(count, 5);
    CHECK(s.train.size() == static_cast<std::size_t>(count * 8 / 10));
    CHECK(s.val.size() == static_cast<std::size_t>(count / 10));
    std::set<int> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == static_cast<std::size_t>(count));
    CHECK(s.test == split_dataset(count, 5).test);
  }
}

TEST_CASE("checkpoint layout and round trip") {
  RunConfig cfg = tiny_run_config();
  const MotionBeatModel m = initial_model(cfg, small_dataset(), std::vector<int>{0, 1, 2, 3});
  const std::string bytes = serialize_checkpoint(m);
  CHECK(bytes.substr(0, 4) == "MBT1");
  CHECK(serialize_checkpoint(deserialize_checkpoint(bytes)) == bytes);
  std::size_t floats = 0;
  for (const auto* p : {&m.audio, &m.motion}) floats += p->num_values();
  CHECK(bytes.size() == 4 + 4 + 2 * 11 * 4 + 4 + floats * 4);
  CHECK_THROWS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)));
  CHECK_THROWS(deserialize_checkpoint("XXXX" + bytes.substr(4)));
}

TEST_CASE("training is deterministic and logs one record per epoch") {
  const Dataset& data = small_dataset();
  const DatasetSplit split = split_dataset(64, 0);
  RunConfig cfg = tiny_run_config();
  cfg.max_epochs = 2;
  cfg.seed = 3;
  std::vector<EpochRecord> seen;
  const TrainResult a = train(cfg, data, split, [&](const EpochRecord& r) { seen.push_back(r); });
  const TrainResult b = train(cfg, data, split);
  REQUIRE(a.log.size() == 2);
  CHECK(seen.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.log[i].train_loss == b.log[i].train_loss);
    CHECK(a.log[i].ecl == b.log[i].ecl);
    CHECK(a.log[i].val_r_at_1 == b.log[i].val_r_at_1);
  }
  CHECK(serialize_checkpoint(a.model) == serialize_checkpoint(b.model));
  const nlohmann::json j = nlohmann::json::parse(epoch_json(a.log[0]));
  for (const char* key : {"epoch", "train_loss", "ecl", "sral", "val_r_at_1"}) CHECK(j.contains(key));
}

TEST_CASE("training from files writes a checkpoint and an append-only metrics log") {
  const fs::path dir = scratch_dir("train");
  write_dataset(dir / "d.jsonl", small_dataset());
  RunConfig cfg = tiny_run_config();
  cfg.max_epochs = 2;
  cfg.dataset = (dir / "d.jsonl").string();
  cfg.output_dir = (dir / "run").string();
  const TrainResult r = train_from_files(cfg);
  CHECK(fs::exists(dir / "run" / "checkpoint.bin"));
  const MotionBeatModel back = load_checkpoint(dir / "run" / "checkpoint.bin");
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(r.model));
  auto lines = [&] {
    std::ifstream in(dir / "run" / "metrics.jsonl");
    int n = 0;
    for (std::string l; std::getline(in, l);) n += !l.empty();
    return n;
  };
  CHECK(lines() == 2);
  train_from_files(cfg);
  CHECK(lines() == 4);
  fs::remove_all(dir);
}

TEST_CASE("training lowers the contrastive loss and early stopping keeps the best epoch") {
  DatasetSpec spec = default_dataset_spec();
  spec.base.seed = 7;
  const Dataset data = generate_dataset(spec, 200);
  RunConfig cfg = tiny_run_config();
  cfg.seed = 1;
  cfg.patience = 5;
  const TrainResult r = train(cfg, data, split_dataset(200, 0));
  REQUIRE(r.log.size() >= 2);
  CHECK(r.log.back().ecl < 0.8 * r.log.front().ecl);
  double best = -1.0;
  int best_epoch = 0;
  for (const EpochRecord& e : r.log) {
    if (e.val_r_at_1 > best) best = e.val_r_at_1, best_epoch = e.epoch;
  }
  CHECK(r.best_val_r_at_1 == best);
  CHECK(r.best_epoch == best_epoch);
  const Embeddings e = embed_clips(r.model, data, split_dataset(200, 0).val);
  CHECK(eval_retrieval(e.audio, e.motion, RetrievalDirection::music_to_motion).recall_at.at(1) == best);
}

TEST_CASE("CLI: usage and validation errors") {
  CHECK(cli({"--help"}).code == 0);
  const CliResult unknown = cli({"train", "--bogus"});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("Usage") != std::string::npos);
  const CliResult missing = cli({"train", "--config", "missing.file"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("missing.file") != std::string::npos);
  CHECK(cli({"grad-check", "--kernel", "nope"}).code == 1);
}

TEST_CASE("CLI: kernel gradient checks") {
  const CliResult dtw = cli({"grad-check", "--kernel", "softdtw"});
  CHECK(dtw.code == 0);
  CHECK(dtw.out.find("max_rel_error") != std::string::npos);
  const CliResult emd = cli({"grad-check", "--kernel", "emd", "--json"});
  CHECK(emd.code == 0);
  const nlohmann::json j = nlohmann::json::parse(emd.out);
  CHECK(j["max_rel_error"].get<double>() < 1e-4);
}

TEST_CASE("CLI: data generation, training and evaluation") {
  const fs::path dir = scratch_dir("cli");
  {
    std::ofstream(dir / "spec.json") << R"({"seed":5,"num_beats":8})";
    std::ofstream(dir / "cfg.json") << R"({"preset":"tiny","max_epochs":1,"batch_size":8})";
  }
  const std::string data = (dir / "d.jsonl").string(), run = (dir / "run").string();
  CHECK(cli({"gen-data", "--spec", (dir / "spec.json").string(), "--out", data, "--count", "24"}).code == 0);
  CHECK(read_dataset(data).size() == 24);
  const CliResult tr = cli({"train", "--config", (dir / "cfg.json").string(), "--data", data, "--out", run, "--seed", "4"});
  CHECK(tr.code == 0);
  const std::string ckpt = (dir / "run" / "checkpoint.bin").string();
  REQUIRE(fs::exists(ckpt));

  const CliResult ev = cli({"eval-retrieval", "--ckpt", ckpt, "--data", data, "--split", "all", "--json"});
  CHECK(ev.code == 0);
  const nlohmann::json j = nlohmann::json::parse(ev.out);
  CHECK(j["direction"] == "music_to_motion");
  CHECK(j.contains("recall_at"));
  CHECK(j.contains("median_rank"));

  const CliResult both = cli({"eval-retrieval", "--ckpt", ckpt, "--data", data, "--split", "all", "--direction", "both"});
  CHECK(both.code == 0);
  CHECK(both.out.find("motion_to_music") != std::string::npos);
  CHECK(cli({"eval-align", "--data", data, "--split", "all"}).code == 0);
  CHECK(cli({"eval-align", "--data", data, "--ckpt", ckpt, "--split", "all", "--json"}).code == 0);
  CHECK(cli({"inspect-ckpt", "--ckpt", ckpt}).code == 0);
  CHECK(cli({"eval-retrieval", "--ckpt", (dir / "nope.bin").string(), "--data", data}).code == 1);

  std::ofstream(dir / "broken.bin") << "MBT1garbage";
  const CliResult broken = cli({"inspect-ckpt", "--ckpt", (dir / "broken.bin").string()});
  CHECK(broken.code == 1);
  CHECK(!broken.err.empty());
  fs::remove_all(dir);
}

TEST_CASE("CLI binary exit codes") {
  const std::string bin = MOTIONBEAT_CLI;
  auto code = [](const std::string& cmd) {
    const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(code(bin + " grad-check --kernel softdtw") == 0);
  CHECK(code(bin + " train --config /nonexistent/cfg.json") == 1);
  CHECK(code(bin + " frobnicate") == 1);
}
