#include "rotorfall/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rotorfall {
namespace {

constexpr std::array<char, 8> kMagic{'R', 'F', 'C', 'K', 'P', 'T', '0', '1'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <class T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(const double* p, std::size_t n) {
    out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  }
  void mlp(const nn::Mlp& net) {
    pod<std::uint8_t>(net.relu_output ? 1 : 0);
    pod<std::uint32_t>(static_cast<std::uint32_t>(net.layer_sizes.size()));
    for (int s : net.layer_sizes) pod<std::int32_t>(s);
    for (const auto& t : net.tensors()) doubles(t.data(), t.size());
  }
  void adam(const nn::AdamState& s) {
    pod(s.cfg.lr);
    pod(s.cfg.beta1);
    pod(s.cfg.beta2);
    pod(s.cfg.eps);
    pod<std::int64_t>(s.step);
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.m.size()));
    for (std::size_t k = 0; k < s.m.size(); ++k) {
      pod<std::uint64_t>(static_cast<std::uint64_t>(s.m[k].size()));
      doubles(s.m[k].data(), static_cast<std::size_t>(s.m[k].size()));
      pod<std::uint64_t>(static_cast<std::uint64_t>(s.v[k].size()));
      doubles(s.v[k].data(), static_cast<std::size_t>(s.v[k].size()));
    }
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <class T>
  T pod() {
    T v{};
    read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ull << 32)) throw std::runtime_error("checkpoint: implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void doubles(double* p, std::size_t n) { read(reinterpret_cast<char*>(p), n * sizeof(double)); }
  nn::Mlp mlp() {
    const bool relu_output = pod<std::uint8_t>() != 0;
    const auto depth = pod<std::uint32_t>();
    if (depth < 2 || depth > 64) throw std::runtime_error("checkpoint: implausible network depth");
    std::vector<int> sizes(depth);
    for (auto& s : sizes) {
      s = pod<std::int32_t>();
      if (s <= 0 || s > (1 << 20)) throw std::runtime_error("checkpoint: implausible layer size");
    }
    nn::Mlp net = nn::Mlp::zeros(sizes, relu_output);
    for (auto& t : net.tensors()) doubles(t.data(), t.size());
    return net;
  }
  nn::AdamState adam() {
    nn::AdamState s;
    s.cfg.lr = pod<double>();
    s.cfg.beta1 = pod<double>();
    s.cfg.beta2 = pod<double>();
    s.cfg.eps = pod<double>();
    s.step = pod<std::int64_t>();
    const auto n = pod<std::uint32_t>();
    for (std::uint32_t k = 0; k < n; ++k) {
      s.m.push_back(vector());
      s.v.push_back(vector());
    }
    return s;
  }

 private:
  Eigen::VectorXd vector() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ull << 32)) throw std::runtime_error("checkpoint: implausible tensor length");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    doubles(v.data(), n);
    return v;
  }
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw std::runtime_error("checkpoint: truncated file");
  }

  std::istream& in_;
};

void check_layout(const nn::AdamState& opt, const std::vector<std::span<const double>>& params, const char* what) {
  bool ok = opt.m.size() == params.size() && opt.v.size() == params.size();
  for (std::size_t k = 0; ok && k < params.size(); ++k) {
    ok = static_cast<std::size_t>(opt.m[k].size()) == params[k].size() &&
         static_cast<std::size_t>(opt.v[k].size()) == params[k].size();
  }
  if (!ok) throw std::runtime_error(std::string("checkpoint: optimizer moments do not match ") + what);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    Writer w(out);
    out.write(kMagic.data(), kMagic.size());
    w.pod(kCheckpointVersion);
    w.str(c.config_json);
    w.pod(c.seed);
    w.pod(c.step);
    w.pod(c.episode);
    w.pod(c.best_return);
    std::ostringstream rng;
    rng << c.state.rng;
    w.str(rng.str());
    w.pod(c.state.log_alpha);
    w.mlp(c.state.actor.trunk);
    w.mlp(c.state.actor.head.mean_layer);
    w.mlp(c.state.actor.head.log_std_layer);
    w.mlp(c.state.q1);
    w.mlp(c.state.q2);
    w.mlp(c.state.q1_target);
    w.mlp(c.state.q2_target);
    w.pod(c.state.actor.head.log_std_min);
    w.pod(c.state.actor.head.log_std_max);
    w.adam(c.state.actor_opt);
    w.adam(c.state.q1_opt);
    w.adam(c.state.q2_opt);
    w.adam(c.state.alpha_opt);
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kMagic) {
    throw std::runtime_error("not a rotorfall checkpoint: " + path.string());
  }
  Reader r(in);
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.config_json = r.str();
  c.seed = r.pod<std::uint64_t>();
  c.step = r.pod<std::int64_t>();
  c.episode = r.pod<std::int64_t>();
  c.best_return = r.pod<double>();
  std::istringstream rng(r.str());
  rng >> c.state.rng;
  if (!rng) throw std::runtime_error("checkpoint: bad RNG state");
  c.state.log_alpha = r.pod<double>();
  c.state.actor.trunk = r.mlp();
  c.state.actor.head.mean_layer = r.mlp();
  c.state.actor.head.log_std_layer = r.mlp();
  c.state.q1 = r.mlp();
  c.state.q2 = r.mlp();
  c.state.q1_target = r.mlp();
  c.state.q2_target = r.mlp();
  c.state.actor.head.log_std_min = r.pod<double>();
  c.state.actor.head.log_std_max = r.pod<double>();
  c.state.actor_opt = r.adam();
  c.state.q1_opt = r.adam();
  c.state.q2_opt = r.adam();
  c.state.alpha_opt = r.adam();

  check_layout(c.state.actor_opt, std::as_const(c.state.actor).tensors(), "actor");
  check_layout(c.state.q1_opt, std::as_const(c.state.q1).tensors(), "q1");
  check_layout(c.state.q2_opt, std::as_const(c.state.q2).tensors(), "q2");
  if (c.state.alpha_opt.m.size() != 1) throw std::runtime_error("checkpoint: bad temperature optimizer");
  return c;
}

}  // namespace rotorfall
