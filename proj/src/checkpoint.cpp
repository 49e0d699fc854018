#include <cstring>
#include <fstream>

#include "enav/policy.hpp"
#include "enav/rng.hpp"
#include "json.hpp"

namespace enav {

namespace {

constexpr char kMagic[8] = {'E', 'N', 'A', 'V', '0', '0', '0', '1'};

nlohmann::json config_json(const PolicyConfig& c) {
  return {{"state_width", c.state_width},
          {"token_embed_dim", c.token_embed_dim},
          {"obs_embed_dim", c.obs_embed_dim},
          {"cell_embed_dim", c.cell_embed_dim},
          {"window", c.window},
          {"max_trace_len", c.max_trace_len},
          {"categories", c.categories},
          {"view_deep", c.view_deep},
          {"view_wide", c.view_wide},
          {"map_feature_len", c.map_feature_len}};
}

PolicyConfig config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  c.state_width = j.at("state_width").get<int>();
  c.token_embed_dim = j.at("token_embed_dim").get<int>();
  c.obs_embed_dim = j.at("obs_embed_dim").get<int>();
  c.cell_embed_dim = j.at("cell_embed_dim").get<int>();
  c.window = j.at("window").get<int>();
  c.max_trace_len = j.at("max_trace_len").get<int>();
  c.categories = j.at("categories").get<int>();
  c.view_deep = j.at("view_deep").get<int>();
  c.view_wide = j.at("view_wide").get<int>();
  c.map_feature_len = j.at("map_feature_len").get<int>();
  return c;
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

}  // namespace

void save_checkpoint(const PolicyNet& net, const std::string& path) {
  nlohmann::json header;
  header["format"] = "ENAV0001";
  header["config"] = config_json(net.config());
  header["config_hash"] = fnv1a(config_json(net.config()).dump());
  auto tensors = nlohmann::json::array();
  for (const auto& t : net.tensors()) {
    tensors.push_back({{"name", t.name},
                       {"rows", t.rows},
                       {"cols", t.cols},
                       {"offset", t.offset}});
  }
  header["tensors"] = tensors;
  header["layout"] = "col_major";
  auto vocab = nlohmann::json::array();
  for (int t = 0; t < tok::kVocabSize; ++t) vocab.push_back(tok::token_name(t));
  header["vocab"] = vocab;

  const std::string header_bytes = header.dump();
  std::string out;
  out.append(kMagic, 8);
  put_u32(out, static_cast<uint32_t>(header_bytes.size()));
  out += header_bytes;
  for (double p : net.params()) put_f32(out, static_cast<float>(p));

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f.write(out.data(), static_cast<long>(out.size()));
  if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

PolicyNet load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  }
  uint32_t header_len = 0;
  for (int i = 0; i < 4; ++i) {
    header_len |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
  }
  if (bytes.size() < 12 + header_len) {
    throw std::runtime_error("load_checkpoint: truncated header in " + path);
  }
  const auto header = nlohmann::json::parse(bytes.substr(12, header_len));
  const PolicyConfig cfg = config_from_json(header.at("config"));

  PolicyNet net(cfg, 0);
  const size_t payload_off = 12 + header_len;
  if (bytes.size() != payload_off + net.param_count() * 4) {
    throw std::runtime_error("load_checkpoint: payload size mismatch in " + path);
  }
  size_t expect_off = 0;
  for (size_t i = 0; i < net.tensors().size(); ++i) {
    const auto& t = net.tensors()[i];
    const auto& ht = header.at("tensors").at(i);
    if (ht.at("name").get<std::string>() != t.name ||
        ht.at("rows").get<int>() != t.rows || ht.at("cols").get<int>() != t.cols ||
        ht.at("offset").get<size_t>() != t.offset || t.offset != expect_off) {
      throw std::runtime_error("load_checkpoint: tensor table mismatch in " + path);
    }
    expect_off += static_cast<size_t>(t.rows) * t.cols;
  }
  for (size_t i = 0; i < net.param_count(); ++i) {
    uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<uint32_t>(
                  static_cast<unsigned char>(bytes[payload_off + i * 4 + b]))
              << (8 * b);
    }
    float v;
    std::memcpy(&v, &bits, 4);
    net.params()[i] = static_cast<double>(v);
  }
  return net;
}

}  // namespace enav
