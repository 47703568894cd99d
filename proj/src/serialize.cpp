#include "commkit/serialize.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace commkit {

namespace {

constexpr char kMagic[8] = {'C', 'K', 'P', 'T', '0', '0', '0', '1'};

template <class T>
void write_pod(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const std::vector<NamedTensor>& tensors) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  f.write(kMagic, sizeof(kMagic));
  write_pod<std::uint64_t>(f, config.attr_dim);
  write_pod<std::uint64_t>(f, config.hidden_dim);
  write_pod<std::uint64_t>(f, config.n_heads);
  write_pod<std::uint64_t>(f, config.readout_hidden);
  write_pod<std::uint64_t>(f, config.k_max);
  write_pod<double>(f, config.dropout);
  write_pod<double>(f, config.negative_slope);
  write_pod<std::uint64_t>(f, tensors.size());
  for (const NamedTensor& t : tensors) {
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(t.name.size()));
    f.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_pod<std::uint64_t>(f, t.value.rows());
    write_pod<std::uint64_t>(f, t.value.cols());
    f.write(reinterpret_cast<const char*>(t.value.data()),
            static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  }
  if (!f.flush()) throw std::runtime_error("write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  LoadedCheckpoint out;
  out.config.attr_dim = read_pod<std::uint64_t>(f);
  out.config.hidden_dim = read_pod<std::uint64_t>(f);
  out.config.n_heads = read_pod<std::uint64_t>(f);
  out.config.readout_hidden = read_pod<std::uint64_t>(f);
  out.config.k_max = read_pod<std::uint64_t>(f);
  out.config.dropout = read_pod<double>(f);
  out.config.negative_slope = read_pod<double>(f);
  const auto count = read_pod<std::uint64_t>(f);
  out.tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const auto rows = read_pod<std::uint64_t>(f);
    const auto cols = read_pod<std::uint64_t>(f);
    Tensor t(rows, cols);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint: truncated tensor data in " + path);
    out.tensors.push_back(NamedTensor{std::move(name), std::move(t)});
  }
  return out;
}

std::vector<NamedTensor> snapshot(const ParameterStore& store) {
  std::vector<NamedTensor> out;
  out.reserve(store.count());
  for (std::size_t i = 0; i < store.count(); ++i)
    out.push_back(NamedTensor{store.name(i), store.value(i)});
  return out;
}

void restore(ParameterStore& store, const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != store.count())
    throw std::runtime_error("restore: tensor count mismatch");
  for (std::size_t i = 0; i < store.count(); ++i) {
    if (tensors[i].name != store.name(i))
      throw std::runtime_error("restore: tensor name mismatch at '" + tensors[i].name + "'");
    if (!tensors[i].value.same_shape(store.value(i)))
      throw std::runtime_error("restore: tensor shape mismatch at '" + tensors[i].name + "'");
    store.value(i) = tensors[i].value;
  }
}

ModelParameters model_from_checkpoint(const LoadedCheckpoint& ckpt) {
  Rng rng(0);  // structure only; values are overwritten below
  ModelParameters params = init_model(ckpt.config, rng);
  restore(params.store, ckpt.tensors);
  return params;
}

}  // namespace commkit
