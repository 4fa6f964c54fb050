#include "tdcrflow/cli/bundle.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include "tdcrflow/common/binary_io.hpp"
#include "tdcrflow/common/error.hpp"

namespace tdcr::cli {
namespace {

constexpr char kPointsMagic[8] = {'T', 'D', 'C', 'R', 'P', 'T', 'S', '1'};
constexpr char kCondMagic[8] = {'T', 'D', 'C', 'R', 'C', 'N', 'D', '1'};

void expect_magic(std::istream& is, const char (&magic)[8], const std::string& file) {
  char buf[8];
  binio::read_exact(is, buf, 8, file + " header");
  if (!std::equal(buf, buf + 8, magic))
    throw FormatError(file + ": wrong magic '" + std::string(buf, 8) + "', expected '" + std::string(magic, 8) + "'");
}

void expect_end(std::istream& is, const std::string& file) {
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError(file + ": file is longer than its declared counts");
}

std::vector<std::size_t> index_list(const nlohmann::json& j, std::size_t count, const char* name) {
  auto v = j.get<std::vector<std::size_t>>();
  for (std::size_t i : v)
    if (i >= count) throw FormatError(std::string("split '") + name + "' references sample " + std::to_string(i));
  return v;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

nlohmann::json stats_to_json(const pc::NormalizationStats& s) {
  nlohmann::json j{{"scale", s.scale}, {"motor_min", s.motor_min}, {"motor_max", s.motor_max}};
  if (s.has_payload()) {
    j["payload_min"] = *s.payload_min;
    j["payload_max"] = *s.payload_max;
  }
  return j;
}

pc::NormalizationStats stats_from_json(const nlohmann::json& j) {
  pc::NormalizationStats s;
  s.scale = j.at("scale").get<double>();
  s.motor_min = j.at("motor_min").get<std::vector<double>>();
  s.motor_max = j.at("motor_max").get<std::vector<double>>();
  if (j.contains("payload_min")) {
    s.payload_min = j.at("payload_min").get<double>();
    s.payload_max = j.at("payload_max").get<double>();
  }
  s.validate();
  return s;
}

std::string encode_points(const synth::Dataset& ds) {
  std::ostringstream os;
  const std::size_t k = ds.size();
  const std::size_t n = k ? ds.clouds[0].size() : ds.config.points;
  const std::size_t d = ds.channels();
  os.write(kPointsMagic, 8);
  binio::write_u32(os, static_cast<std::uint32_t>(k));
  binio::write_u32(os, static_cast<std::uint32_t>(n));
  binio::write_u32(os, static_cast<std::uint32_t>(d));
  for (const auto& c : ds.clouds) {
    TDCR_REQUIRE(c.size() == n && c.channels() == d, "dataset clouds must share one shape");
    for (double v : c.data()) binio::write_f32(os, static_cast<float>(v));
  }
  return os.str();
}

std::string encode_conditions(const synth::Dataset& ds) {
  std::ostringstream os;
  const std::size_t width = ds.condition_width();
  os.write(kCondMagic, 8);
  binio::write_u32(os, static_cast<std::uint32_t>(ds.size()));
  binio::write_u32(os, static_cast<std::uint32_t>(width));
  for (const auto& c : ds.conditions) {
    TDCR_REQUIRE(c.size() == width, "condition rows must share one width");
    for (double v : c) binio::write_f32(os, static_cast<float>(v));
  }
  return os.str();
}

nlohmann::json bundle_manifest(const synth::Dataset& ds, const nlohmann::json& run_config) {
  nlohmann::json j;
  j["format"] = "tdcrflow-dataset";
  j["format_version"] = kBundleVersion;
  j["robot"] = ds.spec.to_json();
  j["samples"] = ds.size();
  j["points"] = ds.size() ? ds.clouds[0].size() : ds.config.points;
  j["channels"] = ds.channels();
  j["motor_dims"] = ds.spec.motor_dims();
  j["condition_width"] = ds.condition_width();
  j["payload"] = ds.config.payload_max.has_value();
  if (ds.config.payload_max) j["payload_max"] = *ds.config.payload_max;
  j["include_base"] = ds.config.include_base;
  j["voxel"] = ds.config.voxel;
  j["seed"] = ds.config.seed;
  j["stats"] = stats_to_json(ds.stats);
  j["split"] = {{"train", ds.split.train}, {"val", ds.split.val}, {"test", ds.split.test}};
  j["run_config"] = run_config;
  return j;
}

void write_bundle(const std::filesystem::path& dir, const synth::Dataset& ds, const nlohmann::json& run_config) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "manifest.json", bundle_manifest(ds, run_config).dump(2) + "\n");
  write_file(dir / "points.bin", encode_points(ds));
  write_file(dir / "conditions.bin", encode_conditions(ds));
}

Bundle read_bundle(const std::filesystem::path& dir) {
  Bundle b;
  try {
    b.manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  const auto& m = b.manifest;
  try {
    if (m.at("format").get<std::string>() != "tdcrflow-dataset") throw FormatError("manifest.json: not a dataset");
    if (m.at("format_version").get<int>() != kBundleVersion)
      throw FormatError("manifest.json: unsupported format version " + m.at("format_version").dump());
    synth::Dataset& ds = b.dataset;
    ds.spec = synth::RobotSpec::from_json(m.at("robot"));
    ds.config.samples = m.at("samples").get<std::size_t>();
    ds.config.points = m.at("points").get<std::size_t>();
    ds.config.color = m.at("channels").get<std::size_t>() == 6;
    if (m.at("payload").get<bool>()) ds.config.payload_max = m.at("payload_max").get<double>();
    ds.config.include_base = m.at("include_base").get<bool>();
    ds.config.voxel = m.at("voxel").get<double>();
    ds.config.seed = m.at("seed").get<std::uint64_t>();
    ds.stats = stats_from_json(m.at("stats"));
    const std::size_t k = ds.config.samples;
    ds.split.train = index_list(m.at("split").at("train"), k, "train");
    ds.split.val = index_list(m.at("split").at("val"), k, "val");
    ds.split.test = index_list(m.at("split").at("test"), k, "test");
    if (ds.split.train.size() + ds.split.val.size() + ds.split.test.size() != k)
      throw FormatError("manifest.json: split lists do not partition the samples");

    {
      std::ifstream is(dir / "points.bin", std::ios::binary);
      if (!is) throw IoError("cannot open " + (dir / "points.bin").string());
      expect_magic(is, kPointsMagic, "points.bin");
      const std::size_t fk = binio::read_u32(is, "points.bin header");
      const std::size_t fn = binio::read_u32(is, "points.bin header");
      const std::size_t fd = binio::read_u32(is, "points.bin header");
      if (fk != k || fn != ds.config.points || fd != m.at("channels").get<std::size_t>())
        throw FormatError("points.bin: header does not match manifest");
      if (fd != 3 && fd != 6) throw FormatError("points.bin: point width must be 3 or 6");
      ds.clouds.resize(k);
      for (auto& cloud : ds.clouds) {
        std::vector<float> raw(fn * fd);
        binio::read_exact(is, raw.data(), raw.size() * sizeof(float), "points.bin payload");
        std::vector<double> data(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
          std::uint32_t bits;
          std::memcpy(&bits, &raw[i], 4);
          data[i] = std::bit_cast<float>(binio::to_le(bits));
        }
        cloud = pc::PointCloud(fd, std::move(data), "base");
      }
      expect_end(is, "points.bin");
    }
    {
      std::ifstream is(dir / "conditions.bin", std::ios::binary);
      if (!is) throw IoError("cannot open " + (dir / "conditions.bin").string());
      expect_magic(is, kCondMagic, "conditions.bin");
      const std::size_t fk = binio::read_u32(is, "conditions.bin header");
      const std::size_t fw = binio::read_u32(is, "conditions.bin header");
      if (fk != k || fw != ds.condition_width() || fw != m.at("condition_width").get<std::size_t>())
        throw FormatError("conditions.bin: header does not match manifest");
      ds.conditions.assign(k, std::vector<double>(fw));
      for (auto& row : ds.conditions)
        for (double& v : row) v = binio::read_f32(is, "conditions.bin payload");
      expect_end(is, "conditions.bin");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  return b;
}

std::vector<double> normalized_condition(const synth::Dataset& ds, std::size_t index) {
  const auto& raw = ds.conditions.at(index);
  const std::size_t dims = ds.spec.motor_dims();
  std::optional<double> payload;
  if (ds.config.payload_max) payload = raw[dims];
  return pc::normalize_condition(std::span<const double>(raw.data(), dims), payload, ds.stats).values;
}

fm::TrainData to_train_data(const synth::Dataset& ds) {
  fm::TrainData td;
  td.scale = ds.stats.scale;
  td.train = ds.split.train;
  td.val = ds.split.val;
  td.clouds.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    td.clouds.push_back(pc::normalize_points(ds.clouds[i], ds.stats.scale).to_tensor());
    td.conditions.push_back(normalized_condition(ds, i));
  }
  return td;
}

}  // namespace tdcr::cli
