#include "motionbeat/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "motionbeat/errors.hpp"

namespace motionbeat {

namespace {

constexpr char kMagic[4] = {'M', 'B', 'T', '1'};
constexpr std::int32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_i32(std::string& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }

void put_f32(std::string& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    if (pos_ + 4 > bytes_.size()) throw DomainError("checkpoint truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f32() {
    const std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 4;
};

void put_config(std::string& out, const EncoderConfig& c) {
  for (int v : {c.num_layers, c.hidden_dim, c.num_heads, c.embed_dim, c.input_dim, c.bar_len, c.ff_mult,
                static_cast<int>(c.contact_guided), static_cast<int>(c.phase_features), 0, 0}) {
    put_i32(out, v);
  }
}

EncoderConfig get_config(Reader& in) {
  EncoderConfig c;
  c.num_layers = in.i32();
  c.hidden_dim = in.i32();
  c.num_heads = in.i32();
  c.embed_dim = in.i32();
  c.input_dim = in.i32();
  c.bar_len = in.i32();
  c.ff_mult = in.i32();
  c.contact_guided = in.i32() != 0;
  c.phase_features = in.i32() != 0;
  if (in.i32() != 0) throw DomainError("checkpoint uses an unsupported activation");
  if (in.i32() != 0) throw DomainError("checkpoint uses dropout, which is unsupported");
  c.validate();
  return c;
}

ModelParams get_params(Reader& in, const EncoderConfig& cfg) {
  ModelParams p;
  for (const TensorSpec& spec : encoder_layout(cfg)) {
    NamedTensor t{spec.name, Matrix(spec.rows, spec.cols), spec.trainable};
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = in.f32();
    p.tensors.push_back(std::move(t));
  }
  return p;
}

void check_layout(const ModelParams& p, const EncoderConfig& cfg) {
  const auto layout = encoder_layout(cfg);
  if (layout.size() != p.tensors.size()) throw ShapeError("parameter count does not match encoder layout");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& t = p.tensors[i];
    if (t.name != layout[i].name || t.value.rows() != layout[i].rows || t.value.cols() != layout[i].cols) {
      throw ShapeError("parameter '" + t.name + "' does not match encoder layout");
    }
  }
}

}  // namespace

std::string serialize_checkpoint(const MotionBeatModel& model) {
  check_layout(model.audio, model.audio_config);
  check_layout(model.motion, model.motion_config);
  std::string out(kMagic, 4);
  put_i32(out, kVersion);
  put_config(out, model.audio_config);
  put_config(out, model.motion_config);
  put_i32(out, static_cast<std::int32_t>(model.audio.tensors.size() + model.motion.tensors.size()));
  for (const ModelParams* p : {&model.audio, &model.motion}) {
    for (const auto& t : p->tensors) {
      for (Eigen::Index i = 0; i < t.value.size(); ++i) put_f32(out, t.value.data()[i]);
    }
  }
  return out;
}

MotionBeatModel deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw DomainError("not a checkpoint (bad magic)");
  Reader in(bytes);
  if (in.i32() != kVersion) throw DomainError("unsupported checkpoint version");
  MotionBeatModel m;
  m.audio_config = get_config(in);
  m.motion_config = get_config(in);
  const std::int32_t count = in.i32();
  m.audio = get_params(in, m.audio_config);
  m.motion = get_params(in, m.motion_config);
  if (static_cast<std::size_t>(count) != m.audio.tensors.size() + m.motion.tensors.size()) {
    throw DomainError("checkpoint tensor count does not match its configuration");
  }
  if (!in.done()) throw DomainError("checkpoint has trailing bytes");
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const MotionBeatModel& model) {
  const std::string bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DomainError("failed writing checkpoint " + path.string());
}

MotionBeatModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace motionbeat
