#ifndef AUTOPHOTO_CHECKPOINT_HPP_
#define AUTOPHOTO_CHECKPOINT_HPP_

#include <span>
#include <string>
#include <vector>

#include "autophoto/netcore.hpp"

namespace autophoto::ckpt {

// Format "autophoto-ckpt/1": tag line, u32 header length + JSON header
// (net specs and run metadata), then per section u64 count + float64 LE.

std::string spec_to_json(const net::NetSpec& spec);
net::NetSpec spec_from_json(const std::string& text);

void save_checkpoint(const std::string& path, const std::string& header_json,
                     const std::vector<std::span<const double>>& sections);

struct Checkpoint {
  std::string header_json;
  std::vector<std::vector<double>> sections;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace autophoto::ckpt

#endif  // AUTOPHOTO_CHECKPOINT_HPP_
