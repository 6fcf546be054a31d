#include "etm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace etm {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'E', 'T', 'M', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CorruptFile(path + ": truncated checkpoint");
  return v;
}

void write_block(std::ofstream& out, const Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

Tensor read_block(std::ifstream& in, std::vector<std::size_t> shape,
                  const std::string& path) {
  Tensor t = Tensor::zeros(std::move(shape));
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!in) throw CorruptFile(path + ": truncated checkpoint");
  return t;
}

}  // namespace

void save_checkpoint(const EtmModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod<std::uint8_t>(out, model.config.mode == TrainMode::labeled ? 0 : 1);
  write_pod<std::uint8_t>(out, model.rho_trainable ? 1 : 0);
  write_pod<std::uint16_t>(out, 0);
  write_pod<std::uint64_t>(out, model.vocab_size());
  write_pod<std::uint64_t>(out, model.topic_count());
  write_pod<std::uint64_t>(out, model.embed_dim());
  write_pod<std::uint64_t>(out, model.encoder.hidden_dim());
  write_pod<std::uint64_t>(out, model.vocab_hash);
  write_block(out, model.rho);
  write_block(out, model.alpha.alpha);
  const InferenceNetParams& e = model.encoder;
  for (const Tensor* t : {&e.w1, &e.b1, &e.w2, &e.b2, &e.w3, &e.b3, &e.w_mu, &e.b_mu,
                          &e.w_lv, &e.b_lv})
    write_block(out, *t);
  if (!out) throw ConfigError("write failed for checkpoint: " + path);
}

EtmModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CorruptFile(path + ": bad checkpoint magic");
  std::uint32_t version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion)
    throw VersionMismatch(path + ": checkpoint version " + std::to_string(version) +
                          ", expected " + std::to_string(kVersion));
  std::uint8_t mode = read_pod<std::uint8_t>(in, path);
  std::uint8_t trainable = read_pod<std::uint8_t>(in, path);
  read_pod<std::uint16_t>(in, path);  // reserved
  std::uint64_t v = read_pod<std::uint64_t>(in, path);
  std::uint64_t k = read_pod<std::uint64_t>(in, path);
  std::uint64_t l = read_pod<std::uint64_t>(in, path);
  std::uint64_t h = read_pod<std::uint64_t>(in, path);
  std::uint64_t vocab_hash = read_pod<std::uint64_t>(in, path);
  if (v == 0 || k < 2 || l == 0 || h == 0)
    throw CorruptFile(path + ": implausible checkpoint dimensions");

  EtmModel model;
  model.config.mode = mode == 0 ? TrainMode::labeled : TrainMode::joint;
  model.rho_trainable = trainable != 0;
  model.config.topics = k;
  model.config.embed_dim = l;
  model.config.hidden_dim = h;
  model.vocab_hash = vocab_hash;
  model.rho = read_block(in, {l, v}, path);
  model.alpha.alpha = read_block(in, {k, l}, path);
  InferenceNetParams& e = model.encoder;
  e.w1 = read_block(in, {v, h}, path);
  e.b1 = read_block(in, {h}, path);
  e.w2 = read_block(in, {h, h}, path);
  e.b2 = read_block(in, {h}, path);
  e.w3 = read_block(in, {h, h}, path);
  e.b3 = read_block(in, {h}, path);
  e.w_mu = read_block(in, {h, k}, path);
  e.b_mu = read_block(in, {k}, path);
  e.w_lv = read_block(in, {h, k}, path);
  e.b_lv = read_block(in, {k}, path);
  in.peek();
  if (!in.eof()) throw CorruptFile(path + ": trailing bytes after parameter blocks");
  return model;
}

}  // namespace etm
