#include "tdcrflow/numerics/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "tdcrflow/common/binary_io.hpp"
#include "tdcrflow/common/error.hpp"

namespace tdcr::num {
namespace {

constexpr const char* kMagic = "TDCRCKPT1";

}  // namespace

std::string encode_checkpoint(nlohmann::json manifest, const ParameterSet& params) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& p : params) entries.push_back({{"name", p.name}, {"shape", p.value.shape()}});
  manifest["parameters"] = std::move(entries);
  const std::string text = manifest.dump(2) + "\n";

  std::ostringstream os(std::ios::binary);
  os << kMagic << "\n" << text.size() << "\n" << text;
  for (const auto& p : params)
    for (double v : p.value.values()) binio::write_f64(os, v);
  for (const auto& p : params)
    for (double v : p.ema.values()) binio::write_f64(os, v);
  return os.str();
}

void write_checkpoint(const std::filesystem::path& path, nlohmann::json manifest,
                      const ParameterSet& params) {
  const std::string bytes = encode_checkpoint(std::move(manifest), params);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

CheckpointData decode_checkpoint(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  std::string magic;
  if (!std::getline(is, magic) || magic != kMagic) throw FormatError("not a checkpoint (bad magic)");
  std::string len_line;
  if (!std::getline(is, len_line)) throw FormatError("checkpoint: missing manifest length");
  std::size_t len = 0;
  try {
    len = static_cast<std::size_t>(std::stoull(len_line));
  } catch (const std::exception&) {
    throw FormatError("checkpoint: bad manifest length");
  }
  std::string text(len, '\0');
  binio::read_exact(is, text.data(), len, "checkpoint manifest");

  CheckpointData out;
  try {
    out.manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  if (!out.manifest.contains("parameters") || !out.manifest["parameters"].is_array())
    throw FormatError("checkpoint manifest lacks a parameter list");

  for (const auto& e : out.manifest["parameters"]) {
    auto shape = e.at("shape").get<std::vector<std::size_t>>();
    out.params.add(e.at("name").get<std::string>(), Tensor(shape));
  }
  for (auto& p : out.params)
    for (double& v : p.value.values()) v = binio::read_f64(is, "checkpoint live block");
  for (auto& p : out.params)
    for (double& v : p.ema.values()) v = binio::read_f64(is, "checkpoint EMA block");
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint: trailing bytes");
  return out;
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return decode_checkpoint(buf.str());
}

void load_parameters(ParameterSet& dst, const ParameterSet& src) {
  if (dst.size() != src.size())
    throw FormatError("checkpoint has " + std::to_string(src.size()) + " parameters, network expects " +
                      std::to_string(dst.size()));
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name || !dst[i].value.same_shape(src[i].value))
      throw FormatError("checkpoint parameter " + src[i].name + src[i].value.shape_string() +
                        " does not match network parameter " + dst[i].name +
                        dst[i].value.shape_string());
    dst[i].value = src[i].value;
    dst[i].ema = src[i].ema;
    dst[i].grad.fill(0.0);
  }
}

}  // namespace tdcr::num
