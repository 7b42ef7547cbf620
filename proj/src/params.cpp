#include "cpls/params.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "cpls/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace cpls {

Tensor ParamStore::add(const std::string& name, std::vector<int> shape) {
  if (index_.count(name))
    throw ContractError("parameter name already registered: " + name);
  Tensor t = Tensor::zeros(std::move(shape), true);
  index_[name] = params_.size();
  params_.push_back({name, t});
  return t;
}

Tensor ParamStore::add_uniform(const std::string& name, std::vector<int> shape,
                               Rng& rng, double lo, double hi) {
  Tensor t = add(name, std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) > 0; }

Tensor ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return params_[it->second].value;
}

size_t ParamStore::value_count() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::map<std::string, Tensor> ParamStore::gradients() const {
  std::map<std::string, Tensor> out;
  for (const auto& p : params_) {
    Tensor g = Tensor::zeros(p.value.shape());
    if (p.value.grad().size() == p.value.size()) g.values() = p.value.grad();
    out.emplace(p.name, std::move(g));
  }
  return out;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) {
    auto& g = p.value.data()->grad;
    std::fill(g.begin(), g.end(), 0.0);
  }
}

double ParamStore::grad_norm(const std::function<bool(const std::string&)>& pick) const {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (pick && !pick(p.name)) continue;
    for (double g : p.value.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

void ParamStore::sgd_step(double lr, double clip,
                          const std::function<bool(const std::string&)>& pick) {
  if (lr <= 0.0) throw ContractError("sgd_step: learning rate must be positive");
  for (const auto& p : params_) {
    if (pick && !pick(p.name)) continue;
    for (double g : p.value.grad())
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in parameter " + p.name +
                           "; training aborted");
  }
  double scale = 1.0;
  if (clip > 0.0) {
    const double norm = grad_norm(pick);
    if (norm > clip) scale = clip / norm;
  }
  for (auto& p : params_) {
    if (pick && !pick(p.name)) continue;
    auto& v = p.value.values();
    const auto& g = p.value.grad();
    if (g.size() != v.size()) continue;  // never touched by backward
    const double step = lr * scale;
    for (size_t i = 0; i < v.size(); ++i) v[i] -= step * g[i];
  }
  zero_grads();
}

namespace {
template <typename T>
void write_raw(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_raw(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("checkpoint truncated");
  return v;
}
constexpr uint32_t kCheckpointVersion = 1;
}  // namespace

void ParamStore::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path);
  write_raw(os, kCheckpointVersion);
  write_raw(os, static_cast<uint32_t>(params_.size()));
  for (const auto& p : params_) {
    write_raw(os, static_cast<uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_raw(os, static_cast<uint32_t>(p.value.rank()));
    for (int d : p.value.shape()) write_raw(os, static_cast<uint32_t>(d));
    os.write(reinterpret_cast<const char*>(p.value.values().data()),
             static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!os) throw DataError("checkpoint write failed: " + path);
}

ParamStore ParamStore::read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  const auto version = read_raw<uint32_t>(is);
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto count = read_raw<uint32_t>(is);
  ParamStore store;
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_raw<uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rank = read_raw<uint32_t>(is);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(read_raw<uint32_t>(is));
    Tensor t = store.add(name, shape);
    is.read(reinterpret_cast<char*>(t.values().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw DataError("checkpoint truncated while reading " + name);
  }
  return store;
}

void ParamStore::load(const std::string& path) {
  ParamStore loaded = read_file(path);
  if (loaded.count() != count())
    throw DataError("checkpoint parameter count " + std::to_string(loaded.count()) +
                    " does not match model (" + std::to_string(count()) + "): " + path);
  for (auto& p : params_) {
    Tensor src = loaded.get(p.name);
    if (src.shape() != p.value.shape())
      throw DataError("checkpoint shape " + src.shape_str() + " does not match " +
                      p.name + " " + p.value.shape_str());
    p.value.values() = src.values();
  }
}

}  // namespace cpls
