#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace tdcr::nets {

struct NetConfig {
  std::string arch = "mlp";        // "mlp" or "hybrid"
  std::size_t channels = 3;        // point width d
  std::size_t condition_width = 6;
  std::size_t width = 128;
  std::size_t blocks = 4;
  std::size_t embed_width = 128;
  std::size_t frequencies = 8;     // sin/cos pairs
  double frequency_base = 2.0;
  double ln_eps = 1e-5;

  // Hybrid context.
  std::vector<std::size_t> resolutions{16, 8};
  double cube_bound = 1.5;
  std::size_t context_width = 64;
  double gate_k = 10.0;
  double gate_tau = 0.4;

  void validate() const;
  nlohmann::json to_json() const;
  static NetConfig from_json(const nlohmann::json& j);
};

}  // namespace tdcr::nets
