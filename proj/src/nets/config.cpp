#include "tdcrflow/nets/config.hpp"

#include "tdcrflow/common/error.hpp"

namespace tdcr::nets {

void NetConfig::validate() const {
  TDCR_REQUIRE(arch == "mlp" || arch == "hybrid", "unknown architecture '" + arch + "' (expected mlp or hybrid)");
  TDCR_REQUIRE(channels == 3 || channels == 6, "point width must be 3 or 6");
  TDCR_REQUIRE(condition_width >= 1, "condition width must be positive");
  TDCR_REQUIRE(width >= 1 && embed_width >= 1 && blocks >= 1, "network widths and depth must be positive");
  TDCR_REQUIRE(embed_width % 2 == 0, "embedding width must be even");
  TDCR_REQUIRE(frequencies >= 1 && frequency_base > 0.0, "bad sinusoidal frequency settings");
  TDCR_REQUIRE(ln_eps > 0.0, "LayerNorm epsilon must be positive");
  if (arch == "hybrid") {
    TDCR_REQUIRE(!resolutions.empty(), "hybrid network needs at least one voxel scale");
    for (auto r : resolutions) TDCR_REQUIRE(r >= 2 && r <= 256, "voxel resolution must be in [2, 256]");
    TDCR_REQUIRE(cube_bound > 0.0, "voxel cube bound must be positive");
    TDCR_REQUIRE(context_width >= 1, "context width must be positive");
    TDCR_REQUIRE(gate_k > 0.0, "gate steepness must be positive");
    TDCR_REQUIRE(gate_tau > 0.0 && gate_tau < 1.0, "gate center must lie in (0, 1)");
  }
}

nlohmann::json NetConfig::to_json() const {
  nlohmann::json j{{"arch", arch},
                   {"channels", channels},
                   {"condition_width", condition_width},
                   {"width", width},
                   {"blocks", blocks},
                   {"embed_width", embed_width},
                   {"frequencies", frequencies},
                   {"frequency_base", frequency_base},
                   {"ln_eps", ln_eps}};
  if (arch == "hybrid") {
    j["resolutions"] = resolutions;
    j["cube_bound"] = cube_bound;
    j["context_width"] = context_width;
    j["gate_k"] = gate_k;
    j["gate_tau"] = gate_tau;
  }
  return j;
}

NetConfig NetConfig::from_json(const nlohmann::json& j) {
  NetConfig c;
  c.arch = j.at("arch").get<std::string>();
  c.channels = j.at("channels").get<std::size_t>();
  c.condition_width = j.at("condition_width").get<std::size_t>();
  c.width = j.at("width").get<std::size_t>();
  c.blocks = j.at("blocks").get<std::size_t>();
  c.embed_width = j.at("embed_width").get<std::size_t>();
  c.frequencies = j.at("frequencies").get<std::size_t>();
  c.frequency_base = j.at("frequency_base").get<double>();
  c.ln_eps = j.at("ln_eps").get<double>();
  if (c.arch == "hybrid") {
    c.resolutions = j.at("resolutions").get<std::vector<std::size_t>>();
    c.cube_bound = j.at("cube_bound").get<double>();
    c.context_width = j.at("context_width").get<std::size_t>();
    c.gate_k = j.at("gate_k").get<double>();
    c.gate_tau = j.at("gate_tau").get<double>();
  }
  c.validate();
  return c;
}

}  // namespace tdcr::nets
