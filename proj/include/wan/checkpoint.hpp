#pragma once

// Binary checkpoint formats (little-endian):
//  - network files: spec header + flat parameters in canonical layer order,
//    64-bit reals, trailing FNV digest of the payload;
//  - trainer state: both networks, both optimizer states, iteration counter
//    and elapsed seconds, so a resumed run continues the uninterrupted trace.

#include "wan/mlp.hpp"
#include "wan/optimizer.hpp"

#include <cstring>
#include <fstream>
#include <string>

namespace wan {

namespace ckpt_detail {

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("checkpoint: truncated stream");
  return v;
}

inline void put_vec(std::ostream& os, const Vector& v) {
  put<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(sizeof(Real) * v.size()));
}

inline Vector get_vec(std::istream& is) {
  auto n = get<std::uint64_t>(is);
  Vector v(static_cast<Eigen::Index>(n));
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(Real) * n));
  if (!is) throw IoError("checkpoint: truncated stream");
  return v;
}

}  // namespace ckpt_detail

inline void write_network(std::ostream& os, const MlpSpec& spec, const ParamVector& params) {
  using namespace ckpt_detail;
  os.write("WANPRM1\n", 8);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(spec.input_dim));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(spec.num_hidden()));
  for (int w : spec.hidden_widths) put<std::uint32_t>(os, static_cast<std::uint32_t>(w));
  for (Activation a : spec.activations) put<std::uint8_t>(os, static_cast<std::uint8_t>(a));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(params.size()));
  os.write(reinterpret_cast<const char*>(params.data.data()),
           static_cast<std::streamsize>(sizeof(Real) * params.size()));
  put<std::uint64_t>(os, fnv1a(params.data.data(), sizeof(Real) * static_cast<size_t>(params.size())));
}

inline std::pair<MlpSpec, ParamVector> read_network(std::istream& is) {
  using namespace ckpt_detail;
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "WANPRM1\n", 8) != 0)
    throw IoError("checkpoint: bad network magic");
  MlpSpec spec;
  spec.input_dim = static_cast<int>(get<std::uint32_t>(is));
  auto L = get<std::uint32_t>(is);
  spec.hidden_widths.resize(L);
  for (auto& w : spec.hidden_widths) w = static_cast<int>(get<std::uint32_t>(is));
  spec.activations.resize(L);
  for (auto& a : spec.activations) a = static_cast<Activation>(get<std::uint8_t>(is));
  auto n = get<std::uint64_t>(is);
  if (n != static_cast<std::uint64_t>(spec.param_count()))
    throw IoError("checkpoint: parameter count does not match the spec header");
  ParamVector p;
  p.data.resize(static_cast<Eigen::Index>(n));
  is.read(reinterpret_cast<char*>(p.data.data()), static_cast<std::streamsize>(sizeof(Real) * n));
  auto digest = get<std::uint64_t>(is);
  if (digest != fnv1a(p.data.data(), sizeof(Real) * static_cast<size_t>(n)))
    throw IoError("checkpoint: parameter digest mismatch");
  return {spec, p};
}

inline void save_network(const std::string& path, const MlpSpec& spec, const ParamVector& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_network(os, spec, params);
}

inline std::pair<MlpSpec, ParamVector> load_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_network(is);
}

// ---------------------------------------------------------------------------
// Full trainer state
// ---------------------------------------------------------------------------

inline void write_optimizer(std::ostream& os, const Optimizer& o) {
  using namespace ckpt_detail;
  put<std::uint8_t>(os, static_cast<std::uint8_t>(o.kind));
  put<Real>(os, o.tau);
  put<Real>(os, o.adam.beta1);
  put<Real>(os, o.adam.beta2);
  put<Real>(os, o.adam.eps);
  put<std::int64_t>(os, o.t);
  put_vec(os, o.accum);
  put_vec(os, o.m);
  put_vec(os, o.v);
}

inline Optimizer read_optimizer(std::istream& is) {
  using namespace ckpt_detail;
  Optimizer o;
  o.kind = static_cast<OptimizerKind>(get<std::uint8_t>(is));
  o.tau = get<Real>(is);
  o.adam.beta1 = get<Real>(is);
  o.adam.beta2 = get<Real>(is);
  o.adam.eps = get<Real>(is);
  o.t = get<std::int64_t>(is);
  o.accum = get_vec(is);
  o.m = get_vec(is);
  o.v = get_vec(is);
  return o;
}

struct TrainState {
  std::uint64_t config_digest = 0;
  std::int64_t iteration = 0;  // completed outer iterations
  Real elapsed_seconds = 0;
  MlpSpec u_spec;
  ParamVector u_params;
  MlpSpec v_spec;
  ParamVector v_params;
  Optimizer theta_opt;
  Optimizer eta_opt;
};

inline void save_train_state(const std::string& path, const TrainState& st) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  using namespace ckpt_detail;
  os.write("WANCKP1\n", 8);
  put<std::uint64_t>(os, st.config_digest);
  put<std::int64_t>(os, st.iteration);
  put<Real>(os, st.elapsed_seconds);
  write_network(os, st.u_spec, st.u_params);
  write_network(os, st.v_spec, st.v_params);
  write_optimizer(os, st.theta_opt);
  write_optimizer(os, st.eta_opt);
}

inline TrainState load_train_state(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  using namespace ckpt_detail;
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "WANCKP1\n", 8) != 0) throw IoError("checkpoint: bad magic");
  TrainState st;
  st.config_digest = get<std::uint64_t>(is);
  st.iteration = get<std::int64_t>(is);
  st.elapsed_seconds = get<Real>(is);
  std::tie(st.u_spec, st.u_params) = read_network(is);
  std::tie(st.v_spec, st.v_params) = read_network(is);
  st.theta_opt = read_optimizer(is);
  st.eta_opt = read_optimizer(is);
  return st;
}

}  // namespace wan
