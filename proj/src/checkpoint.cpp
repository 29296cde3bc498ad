#include "slf/nn/checkpoint.hpp"

#include "slf/lf/io.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace slf::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  template <typename T>
  void put(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void bytes(const std::string& s) { out_ += s; }
  void tensor(const Tensor<float>& t) {
    put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (Index d : t.shape()) put<std::uint32_t>(static_cast<std::uint32_t>(d));
    out_.append(reinterpret_cast<const char*>(t.ptr()), static_cast<std::size_t>(t.size()) * sizeof(float));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  Tensor<float> tensor() {
    const auto rank = get<std::uint32_t>();
    if (rank > 8) throw std::runtime_error("checkpoint: implausible tensor rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(get<std::uint32_t>());
    Tensor<float> t(shape);
    const std::size_t n = static_cast<std::size_t>(t.size()) * sizeof(float);
    need(n);
    std::memcpy(t.ptr(), s_.data() + pos_, n);
    pos_ += n;
    return t;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(std::string(kCheckpointMagic, 8));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.header.size()));
  w.bytes(ckpt.header);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) w.tensor(t);
  w.put<std::uint8_t>(ckpt.adam ? 1 : 0);
  if (ckpt.adam) {
    const AdamState<float>& a = *ckpt.adam;
    if (a.m.size() != ckpt.tensors.size() || a.v.size() != ckpt.tensors.size())
      throw std::invalid_argument("checkpoint: optimizer state does not match tensors");
    w.put<std::uint64_t>(static_cast<std::uint64_t>(a.step));
    w.put<double>(a.beta1);
    w.put<double>(a.beta2);
    w.put<double>(a.eps);
    w.put<double>(a.lr_schedule.initial);
    w.put<double>(a.lr_schedule.decay_rate);
    w.put<std::int64_t>(a.lr_schedule.decay_steps);
    w.put<std::uint8_t>(a.lr_schedule.staircase ? 1 : 0);
    for (std::size_t i = 0; i < a.m.size(); ++i) w.tensor(Tensor<float>(ckpt.tensors[i].shape(), a.m[i]));
    for (std::size_t i = 0; i < a.v.size(); ++i) w.tensor(Tensor<float>(ckpt.tensors[i].shape(), a.v[i]));
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(8) != std::string(kCheckpointMagic, 8)) throw std::runtime_error("checkpoint: bad magic");
  Checkpoint ckpt;
  ckpt.header = r.bytes(r.get<std::uint32_t>());
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) ckpt.tensors.push_back(r.tensor());
  if (r.get<std::uint8_t>() != 0) {
    AdamState<float> a;
    a.step = static_cast<std::int64_t>(r.get<std::uint64_t>());
    a.beta1 = r.get<double>();
    a.beta2 = r.get<double>();
    a.eps = r.get<double>();
    a.lr_schedule.initial = r.get<double>();
    a.lr_schedule.decay_rate = r.get<double>();
    a.lr_schedule.decay_steps = r.get<std::int64_t>();
    a.lr_schedule.staircase = r.get<std::uint8_t>() != 0;
    for (std::uint32_t i = 0; i < n; ++i) a.m.push_back(r.tensor().data());
    for (std::uint32_t i = 0; i < n; ++i) a.v.push_back(r.tensor().data());
    ckpt.adam = std::move(a);
  }
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace slf::nn
