#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "asmalign/graph.hpp"
#include "asmalign/tensor.hpp"
#include "asmalign/util.hpp"

namespace asmalign {

struct CheckpointIOError : Error {
  explicit CheckpointIOError(const std::string& msg) : Error("CheckpointIOError: " + msg) {}
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update with bias correction. `t` is the 1-based step count after
// this update. Gradient tensors of zero size are treated as all-zero.
template <typename T>
void adam_step(Tensor<T>& param, const Tensor<T>& grad, Tensor<T>& m, Tensor<T>& v,
               std::uint64_t t, const AdamConfig& cfg) {
  if (grad.numel() != 0 && !param.same_shape(grad))
    throw ShapeMismatch("adam_step param " + param.shape_str() + " vs grad " + grad.shape_str());
  if (m.numel() != param.numel()) m = Tensor<T>(param.rows(), param.cols());
  if (v.numel() != param.numel()) v = Tensor<T>(param.rows(), param.cols());
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T bc1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  const T bc2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  for (std::size_t i = 0; i < param.numel(); ++i) {
    T g = grad.numel() ? grad.data[i] : T(0);
    m.data[i] = b1 * m.data[i] + (T(1) - b1) * g;
    v.data[i] = b2 * v.data[i] + (T(1) - b2) * g * g;
    T mhat = m.data[i] / bc1;
    T vhat = v.data[i] / bc2;
    param.data[i] -= static_cast<T>(cfg.lr) * mhat / (std::sqrt(vhat) + static_cast<T>(cfg.eps));
  }
}

// Named parameter tensors plus Adam state. Single writer during training.
template <typename T>
class ParamStore {
 public:
  int add(const std::string& name, Tensor<T> value) {
    if (index_.count(name)) throw Error("duplicate parameter name: " + name);
    index_[name] = static_cast<int>(entries_.size());
    entries_.push_back(Entry{name, std::move(value), {}, {}});
    return static_cast<int>(entries_.size()) - 1;
  }

  int id(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter: " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<T>& value(int pid) { return entries_[pid].value; }
  const Tensor<T>& value(int pid) const { return entries_[pid].value; }
  Tensor<T>& value(const std::string& name) { return entries_[id(name)].value; }
  const Tensor<T>& value(const std::string& name) const { return entries_[id(name)].value; }
  const std::string& name(int pid) const { return entries_[pid].name; }

  std::size_t size() const { return entries_.size(); }
  std::uint64_t step_count() const { return adam_t_; }
  void set_step_count(std::uint64_t t) { adam_t_ = t; }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

  void step(const std::vector<Tensor<T>>& grads, const AdamConfig& cfg) {
    ++adam_t_;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      static const Tensor<T> kEmpty;
      const Tensor<T>& g = i < grads.size() ? grads[i] : kEmpty;
      adam_step(entries_[i].value, g, entries_[i].m, entries_[i].v, adam_t_, cfg);
    }
  }

  Tensor<T>& adam_m(int pid) { return entries_[pid].m; }
  Tensor<T>& adam_v(int pid) { return entries_[pid].v; }

 private:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> m, v;
  };
  std::vector<Entry> entries_;
  std::map<std::string, int> index_;
  std::uint64_t adam_t_ = 0;
};

// Named parameter leaves of one store bound into one graph.
template <typename T>
struct BoundParams {
  std::map<std::string, std::size_t> leaf;

  std::size_t at(const std::string& name) const {
    auto it = leaf.find(name);
    if (it == leaf.end()) throw Error("parameter not bound: " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return leaf.count(name) != 0; }
};

template <typename T>
BoundParams<T> bind_params(Graph<T>& g, const ParamStore<T>& store) {
  BoundParams<T> b;
  for (std::size_t i = 0; i < store.size(); ++i)
    b.leaf[store.name(static_cast<int>(i))] =
        g.param(store.value(static_cast<int>(i)), static_cast<int>(i));
  return b;
}

// ---- checkpoint file ----
// magic, format version, config echo (JSON text), adam step count, then named
// tensors (parameters followed by optimizer moments) as float32 little-endian.

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  write_u32(os, static_cast<std::uint32_t>(v));
  write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t lo = read_u32(is);
  std::uint64_t hi = read_u32(is);
  return lo | (hi << 32);
}

inline void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_str(std::istream& is) {
  std::uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}

inline void write_f32(std::ostream& os, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  write_u32(os, u);
}

inline float read_f32(std::istream& is) {
  std::uint32_t u = read_u32(is);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

template <typename T>
void write_tensor(std::ostream& os, const std::string& name, const Tensor<T>& t) {
  write_str(os, name);
  write_u32(os, static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) write_u64(os, d);
  for (T v : t.data) write_f32(os, static_cast<float>(v));
}

template <typename T>
std::pair<std::string, Tensor<T>> read_tensor(std::istream& is) {
  std::string name = read_str(is);
  std::uint32_t rank = read_u32(is);
  std::vector<std::size_t> shape;
  std::size_t numel = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape.push_back(static_cast<std::size_t>(read_u64(is)));
    numel *= shape.back();
  }
  Tensor<T> t;
  t.shape = shape;
  t.data.resize(numel);
  for (auto& v : t.data) v = static_cast<T>(read_f32(is));
  return {name, std::move(t)};
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'A', 'A', 'L', 'N', 'C', 'K', 'P', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(const std::string& path, const ParamStore<T>& store,
                     const std::string& config_json, bool with_optimizer_state = true) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointIOError("cannot open for write: " + path);
  os.write(kCheckpointMagic, 8);
  detail::write_u32(os, kCheckpointVersion);
  detail::write_str(os, config_json);
  detail::write_u64(os, store.step_count());
  std::uint32_t count = static_cast<std::uint32_t>(store.size());
  detail::write_u32(os, with_optimizer_state ? count * 3 : count);
  auto& mut = const_cast<ParamStore<T>&>(store);
  for (std::size_t i = 0; i < store.size(); ++i)
    detail::write_tensor(os, store.name(static_cast<int>(i)), store.value(static_cast<int>(i)));
  if (with_optimizer_state) {
    for (std::size_t i = 0; i < store.size(); ++i) {
      auto& m = mut.adam_m(static_cast<int>(i));
      if (m.numel() == 0) m = Tensor<T>(store.value(static_cast<int>(i)).rows(),
                                        store.value(static_cast<int>(i)).cols());
      detail::write_tensor(os, "adam_m:" + store.name(static_cast<int>(i)), m);
    }
    for (std::size_t i = 0; i < store.size(); ++i) {
      auto& v = mut.adam_v(static_cast<int>(i));
      if (v.numel() == 0) v = Tensor<T>(store.value(static_cast<int>(i)).rows(),
                                        store.value(static_cast<int>(i)).cols());
      detail::write_tensor(os, "adam_v:" + store.name(static_cast<int>(i)), v);
    }
  }
  if (!os) throw CheckpointIOError("write failed: " + path);
}

template <typename T>
std::string load_checkpoint(const std::string& path, ParamStore<T>& store) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointIOError("cannot open for read: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw CheckpointIOError("bad magic in " + path);
  std::uint32_t version = detail::read_u32(is);
  if (version != kCheckpointVersion)
    throw CheckpointIOError("unsupported checkpoint version " + std::to_string(version));
  std::string config_json = detail::read_str(is);
  std::uint64_t t = detail::read_u64(is);
  std::uint32_t count = detail::read_u32(is);
  std::map<std::string, Tensor<T>> adam_m, adam_v;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, tensor] = detail::read_tensor<T>(is);
    if (!is) throw CheckpointIOError("truncated checkpoint: " + path);
    if (name.rfind("adam_m:", 0) == 0)
      adam_m[name.substr(7)] = std::move(tensor);
    else if (name.rfind("adam_v:", 0) == 0)
      adam_v[name.substr(7)] = std::move(tensor);
    else
      store.add(name, std::move(tensor));
  }
  for (auto& [name, tensor] : adam_m) store.adam_m(store.id(name)) = std::move(tensor);
  for (auto& [name, tensor] : adam_v) store.adam_v(store.id(name)) = std::move(tensor);
  store.set_step_count(t);
  return config_json;
}

}  // namespace asmalign
