#include "autophoto/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace autophoto::ckpt {

using nlohmann::json;

namespace {
constexpr const char* kTag = "autophoto-ckpt/1";

const char* act_name(net::Activation a) {
  switch (a) {
    case net::Activation::Tanh: return "tanh";
    case net::Activation::Relu: return "relu";
    default: return "identity";
  }
}

net::Activation act_from_name(const std::string& s) {
  if (s == "tanh") return net::Activation::Tanh;
  if (s == "relu") return net::Activation::Relu;
  if (s == "identity") return net::Activation::Identity;
  throw std::runtime_error("checkpoint: unknown activation " + s);
}
}  // namespace

std::string spec_to_json(const net::NetSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    if (l.kind == net::LayerSpec::Kind::Lstm)
      layers.push_back({{"kind", "lstm"}, {"in", l.in}, {"hidden", l.out}});
    else
      layers.push_back({{"kind", "dense"}, {"in", l.in}, {"out", l.out},
                        {"act", act_name(l.act)}});
  }
  return layers.dump();
}

net::NetSpec spec_from_json(const std::string& text) {
  net::NetSpec spec;
  for (const auto& l : json::parse(text)) {
    if (l.at("kind") == "lstm")
      spec.layers.push_back(net::lstm_cell(l.at("in").get<int>(), l.at("hidden").get<int>()));
    else
      spec.layers.push_back(net::dense(l.at("in").get<int>(), l.at("out").get<int>(),
                                       act_from_name(l.at("act").get<std::string>())));
  }
  spec.validate();
  return spec;
}

void save_checkpoint(const std::string& path, const std::string& header_json,
                     const std::vector<std::span<const double>>& sections) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  f << kTag << "\n";
  const std::uint32_t hlen = static_cast<std::uint32_t>(header_json.size());
  f.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
  f.write(header_json.data(), hlen);
  const std::uint32_t nsec = static_cast<std::uint32_t>(sections.size());
  f.write(reinterpret_cast<const char*>(&nsec), sizeof nsec);
  for (const auto& s : sections) {
    const std::uint64_t n = s.size();
    f.write(reinterpret_cast<const char*>(&n), sizeof n);
    f.write(reinterpret_cast<const char*>(s.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string tag;
  std::getline(f, tag);
  if (tag != kTag) throw std::runtime_error("checkpoint: unknown format tag in " + path);
  std::uint32_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
  Checkpoint c;
  c.header_json.resize(hlen);
  f.read(c.header_json.data(), hlen);
  std::uint32_t nsec = 0;
  f.read(reinterpret_cast<char*>(&nsec), sizeof nsec);
  for (std::uint32_t i = 0; i < nsec; ++i) {
    std::uint64_t n = 0;
    f.read(reinterpret_cast<char*>(&n), sizeof n);
    std::vector<double> v(n);
    f.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
    c.sections.push_back(std::move(v));
  }
  if (!f) throw std::runtime_error("checkpoint: truncated file " + path);
  return c;
}

}  // namespace autophoto::ckpt
