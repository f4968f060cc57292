#include "ccpt/nn/optim.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace ccpt::nn {

void Adam::step(std::span<const NamedParam> params, const Gradients& grads) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const NamedParam& p : params) {
      m_.push_back(p.value->zeros_like());
      v_.push_back(p.value->zeros_like());
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter set changed between steps");

  double clip = 1.0;
  if (cfg_.max_grad_norm > 0.0) {
    const double norm = gradient_norm(grads);
    if (!std::isfinite(norm)) throw NumericError("adam: non-finite gradient norm");
    if (norm > cfg_.max_grad_norm) clip = cfg_.max_grad_norm / norm;
  }

  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = *params[i].value;
    const Tensor& g = grads[i];
    if (g.size() != w.size()) throw ShapeError("adam: gradient shape mismatch for " + params[i].name);
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j] * clip;
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      w[j] -= cfg_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
  }
}

// ---------------------------------------------------------------- parameter files

namespace {

constexpr char kMagic[8] = {'C', 'C', 'P', 'T', 'P', 'A', 'R', 'M'};

static_assert(std::endian::native == std::endian::little, "parameter files assume a little-endian host");

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void finish(const std::string& path) {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed for '" + path + "'");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open '" + path + "'");
  }
  void bytes(void* p, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw ParseError(std::string("truncated parameter file while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v = 0;
    bytes(&v, 4, what);
    return v;
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    if (n > (1u << 20)) throw ParseError(std::string("implausible string length for ") + what);
    std::string s(n, '\0');
    bytes(s.data(), n, what);
    return s;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
};

}  // namespace

void save_params(const std::string& path, const std::string& descriptor, std::span<const NamedParam> params) {
  Writer w(path);
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kParamFormatVersion);
  w.str(descriptor);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const NamedParam& p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value->shape.size()));
    for (int d : p.value->shape) w.u32(static_cast<std::uint32_t>(d));
    w.bytes(p.value->data.data(), p.value->size() * sizeof(double));
  }
  w.finish(path);
}

void load_params(const std::string& path, const std::string& descriptor, std::span<const NamedParam> params) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw ParseError("'" + path + "' is not a parameter file");
  const std::uint32_t version = r.u32("version");
  if (version != kParamFormatVersion) {
    throw InvariantError("parameter file version " + std::to_string(version) + " unsupported (expected " +
                         std::to_string(kParamFormatVersion) + ")");
  }
  const std::string stored = r.str("descriptor");
  if (stored != descriptor) {
    throw InvariantError("descriptor mismatch: file has '" + stored + "', network is '" + descriptor + "'");
  }
  const std::uint32_t count = r.u32("tensor count");
  if (count != params.size()) throw InvariantError("parameter count mismatch in '" + path + "'");
  // Read everything before touching the destination so a bad file leaves it intact.
  std::vector<std::vector<double>> staged;
  for (const NamedParam& p : params) {
    const std::string name = r.str("tensor name");
    if (name != p.name) throw InvariantError("expected tensor '" + p.name + "', found '" + name + "'");
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) throw ParseError("implausible tensor rank in '" + path + "'");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(r.u32("dims"));
    if (shape != p.value->shape) {
      throw InvariantError("shape mismatch for '" + name + "': " + shape_string(shape) + " vs " +
                           shape_string(p.value->shape));
    }
    std::vector<double> data(p.value->size());
    r.bytes(data.data(), data.size() * sizeof(double), "tensor data");
    staged.push_back(std::move(data));
  }
  if (!r.at_end()) throw ParseError("trailing bytes in '" + path + "'");
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value->data = std::move(staged[i]);
}

std::uint64_t param_hash(std::span<const NamedParam> params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const NamedParam& p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value->data.data());
    for (std::size_t i = 0; i < p.value->size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace ccpt::nn
