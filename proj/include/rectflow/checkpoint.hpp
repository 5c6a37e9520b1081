#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rectflow/error.hpp"
#include "rectflow/flow.hpp"
#include "rectflow/model.hpp"
#include "rectflow/preprocess.hpp"

namespace rectflow {

inline constexpr int kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[9] = "RECTFLOW";  // 8 bytes on disk

struct Checkpoint {
  int version = kCheckpointVersion;
  ModelParams params;
  ModelConfig model_config;
  FlowConfig flow_config;
  PreprocessState preprocess;
  long iterations_run = 0;
  double final_loss = 0.0;
};

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"width_factor", c.width_factor},
          {"dropout_p", c.dropout_p},
          {"temb_dim", c.temb_dim},
          {"init_seed", c.init_seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.width_factor = j.at("width_factor").get<double>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.temb_dim = j.at("temb_dim").get<int>();
  c.init_seed = j.at("init_seed").get<uint64_t>();
  c.validate();
  return c;
}

inline nlohmann::json flow_config_to_json(const FlowConfig& c) {
  return {{"m", c.m},
          {"s", c.s},
          {"timestep_mode", timestep_mode_name(c.timestep_mode)},
          {"noise_mode", noise_mode_name(c.noise_mode)}};
}

inline FlowConfig flow_config_from_json(const nlohmann::json& j) {
  FlowConfig c;
  c.m = j.at("m").get<double>();
  c.s = j.at("s").get<double>();
  const std::string ts = j.at("timestep_mode").get<std::string>();
  if (ts == "logit_normal") c.timestep_mode = TimestepMode::logit_normal;
  else if (ts == "uniform") c.timestep_mode = TimestepMode::uniform;
  else fail(ErrorKind::config, "flow: unknown timestep mode \"" + ts + "\"");
  const std::string nm = j.at("noise_mode").get<std::string>();
  if (nm == "hybrid") c.noise_mode = NoiseMode::hybrid;
  else if (nm == "gaussian") c.noise_mode = NoiseMode::gaussian;
  else if (nm == "hybrid_onehot") c.noise_mode = NoiseMode::hybrid_onehot;
  else fail(ErrorKind::config, "flow: unknown noise mode \"" + nm + "\"");
  c.validate();
  return c;
}

namespace detail {

inline void put_u64_le(std::ostream& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline uint64_t get_u64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  require(in.gcount() == 8, ErrorKind::corrupt_file, "checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

// File layout: 8-byte magic, little-endian u64 header length, JSON header
// (configs, preprocess state, tensor shapes), then each tensor's values as
// raw little-endian 64-bit floats in declaration order.
inline void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  nlohmann::json header = {
      {"version", cp.version},
      {"model_config", model_config_to_json(cp.model_config)},
      {"flow_config", flow_config_to_json(cp.flow_config)},
      {"preprocess", cp.preprocess.to_json()},
      {"iterations_run", cp.iterations_run},
      {"final_loss", cp.final_loss},
      {"data_dim", cp.params.data_dim},
  };
  nlohmann::json tensors = nlohmann::json::array();
  const auto names = ModelParams::tensor_names();
  const auto list = cp.params.tensors();
  for (size_t i = 0; i < list.size(); ++i)
    tensors.push_back({{"name", names[i]},
                       {"rows", list[i]->rows()},
                       {"cols", list[i]->cols()}});
  header["tensors"] = std::move(tensors);

  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::io, "checkpoint: cannot write " + path);
  out.write(kCheckpointMagic, 8);
  const std::string hs = header.dump();
  detail::put_u64_le(out, hs.size());
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const Matrix* t : list)
    for (size_t k = 0; k < t->size(); ++k)
      detail::put_u64_le(out, std::bit_cast<uint64_t>(t->data()[k]));
  require(out.good(), ErrorKind::io, "checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::io, "checkpoint: cannot open " + path);

  char magic[8];
  in.read(magic, 8);
  require(in.gcount() == 8 && std::memcmp(magic, kCheckpointMagic, 8) == 0,
          ErrorKind::corrupt_file, "checkpoint: bad magic bytes in " + path);

  const uint64_t hlen = detail::get_u64_le(in);
  require(hlen > 0 && hlen < (1ull << 30), ErrorKind::corrupt_file,
          "checkpoint: implausible header length");
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  require(static_cast<uint64_t>(in.gcount()) == hlen, ErrorKind::corrupt_file,
          "checkpoint: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::corrupt_file, std::string("checkpoint: invalid header JSON: ") + e.what());
  }

  Checkpoint cp;
  cp.version = header.at("version").get<int>();
  require(cp.version <= kCheckpointVersion, ErrorKind::format,
          "checkpoint: file version " + std::to_string(cp.version) +
              " newer than supported version " + std::to_string(kCheckpointVersion));
  cp.model_config = model_config_from_json(header.at("model_config"));
  cp.flow_config = flow_config_from_json(header.at("flow_config"));
  cp.preprocess = PreprocessState::from_json(header.at("preprocess"));
  cp.iterations_run = header.at("iterations_run").get<long>();
  cp.final_loss = header.at("final_loss").get<double>();

  cp.params.dropout_p = cp.model_config.dropout_p;
  cp.params.temb_dim = cp.model_config.temb_dim;
  cp.params.data_dim = header.at("data_dim").get<int>();
  require(static_cast<size_t>(cp.params.data_dim) == cp.preprocess.dim,
          ErrorKind::corrupt_file, "checkpoint: data dim does not match preprocess state");

  const auto names = ModelParams::tensor_names();
  const auto& jt = header.at("tensors");
  require(jt.is_array() && jt.size() == names.size(), ErrorKind::corrupt_file,
          "checkpoint: unexpected tensor list");
  auto list = cp.params.tensors();
  for (size_t i = 0; i < list.size(); ++i) {
    require(jt[i].at("name").get<std::string>() == names[i], ErrorKind::corrupt_file,
            "checkpoint: tensor order mismatch at " + names[i]);
    const int rows = jt[i].at("rows").get<int>();
    const int cols = jt[i].at("cols").get<int>();
    *list[i] = Matrix(rows, cols);
    for (size_t k = 0; k < list[i]->size(); ++k)
      list[i]->data()[k] = std::bit_cast<double>(detail::get_u64_le(in));
  }
  require(in.peek() == std::char_traits<char>::eof(), ErrorKind::corrupt_file,
          "checkpoint: trailing bytes in " + path);
  return cp;
}

}  // namespace rectflow
