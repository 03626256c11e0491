#include "livsynth/params.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "livsynth/errors.hpp"

namespace livsynth {

namespace {
constexpr char kMagic[8] = {'L', 'V', 'S', 'P', 'R', 'M', '0', '1'};

template <typename T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw InputError("parameter blob truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}
}  // namespace

grad::Tensor ParameterStore::add(const std::string& key, std::size_t rows, std::size_t cols,
                                 std::vector<double> values, bool decay) {
  if (contains(key)) throw CompileError("duplicate parameter key '" + key + "'");
  index_[key] = entries_.size();
  entries_.push_back({key, grad::Tensor::parameter(rows, cols, std::move(values)), decay});
  return entries_.back().tensor;
}

const grad::Tensor& ParameterStore::get(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw InputError("no parameter '" + key + "'");
  return entries_[it->second].tensor;
}

grad::Tensor& ParameterStore::get(const std::string& key) {
  auto it = index_.find(key);
  if (it == index_.end()) throw InputError("no parameter '" + key + "'");
  return entries_[it->second].tensor;
}

std::size_t ParameterStore::scalar_count(const std::vector<std::string>& exclude_prefixes) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    bool skip = false;
    for (const auto& p : exclude_prefixes) skip = skip || e.key.rfind(p, 0) == 0;
    if (!skip) n += e.tensor.size();
  }
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::string ParameterStore::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint64_t>(out, entries_.size());
  for (const auto& e : entries_) {
    put<std::uint64_t>(out, e.key.size());
    out += e.key;
    put<std::uint64_t>(out, e.tensor.rows());
    put<std::uint64_t>(out, e.tensor.cols());
    out.append(reinterpret_cast<const char*>(e.tensor.values().data()), e.tensor.size() * sizeof(double));
  }
  return out;
}

void ParameterStore::deserialize(const std::string& blob) {
  if (blob.size() < sizeof(kMagic) || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0)
    throw InputError("not a parameter blob");
  std::size_t pos = sizeof(kMagic);
  const auto count = take<std::uint64_t>(blob, pos);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = take<std::uint64_t>(blob, pos);
    if (pos + len > blob.size()) throw InputError("parameter blob truncated");
    const std::string key = blob.substr(pos, len);
    pos += len;
    const auto rows = take<std::uint64_t>(blob, pos);
    const auto cols = take<std::uint64_t>(blob, pos);
    auto& t = get(key);
    if (t.rows() != rows || t.cols() != cols) throw ShapeError("parameter '" + key + "' has a different shape");
    const std::size_t bytes = rows * cols * sizeof(double);
    if (pos + bytes > blob.size()) throw InputError("parameter blob truncated");
    std::memcpy(t.mutable_values().data(), blob.data() + pos, bytes);
    pos += bytes;
  }
}

void ParameterStore::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  const auto blob = serialize();
  f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

void ParameterStore::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  deserialize(ss.str());
}

}  // namespace livsynth
