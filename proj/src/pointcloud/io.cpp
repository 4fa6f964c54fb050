#include "tdcrflow/pointcloud/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tdcrflow/common/error.hpp"

namespace tdcr::pc {
namespace {

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

int color_byte(double c) { return static_cast<int>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); }

std::string slurp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

double parse_double(const std::string& tok, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw FormatError(std::string("bad ") + what + " value '" + tok + "'");
  return v;
}

}  // namespace

std::string encode_ply(const PointCloud& cloud, const std::vector<std::string>& comments) {
  std::ostringstream os;
  os << "ply\nformat ascii 1.0\n";
  for (const auto& c : comments) os << "comment " << c << "\n";
  os << "element vertex " << cloud.size() << "\n";
  os << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_color()) os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  os << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    os << fmt_double(cloud(i, 0)) << ' ' << fmt_double(cloud(i, 1)) << ' ' << fmt_double(cloud(i, 2));
    if (cloud.has_color())
      os << ' ' << color_byte(cloud(i, 3)) << ' ' << color_byte(cloud(i, 4)) << ' ' << color_byte(cloud(i, 5));
    os << '\n';
  }
  return os.str();
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<std::string>& comments) {
  spit(path, encode_ply(cloud, comments));
}

PointCloud decode_ply(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("ply", 0) != 0) throw FormatError("not a PLY file");
  std::size_t vertices = 0;
  bool in_vertex = false, seen_vertex = false;
  std::vector<std::string> props;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw FormatError("only ASCII PLY is supported, got " + fmt);
    } else if (key == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) {
        ls >> vertices;
        seen_vertex = true;
      }
    } else if (key == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      if (type == "list") throw FormatError("list properties on vertices are not supported");
      props.push_back(name);
    } else if (key == "end_header") {
      break;
    }
  }
  if (!seen_vertex) throw FormatError("PLY has no vertex element");
  auto find = [&props](const char* n) -> int {
    auto it = std::find(props.begin(), props.end(), n);
    return it == props.end() ? -1 : static_cast<int>(it - props.begin());
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  if (ix < 0 || iy < 0 || iz < 0) throw FormatError("PLY vertices lack x/y/z");
  const int ir = find("red"), ig = find("green"), ib = find("blue");
  const bool color = ir >= 0 && ig >= 0 && ib >= 0;

  std::vector<double> data;
  data.reserve(vertices * (color ? 6 : 3));
  std::vector<std::string> tok(props.size());
  for (std::size_t v = 0; v < vertices; ++v) {
    if (!std::getline(is, line)) throw FormatError("PLY ends before all vertices were read");
    std::istringstream ls(line);
    for (auto& t : tok)
      if (!(ls >> t)) throw FormatError("short PLY vertex row " + std::to_string(v));
    data.push_back(parse_double(tok[ix], "x"));
    data.push_back(parse_double(tok[iy], "y"));
    data.push_back(parse_double(tok[iz], "z"));
    if (color)
      for (int c : {ir, ig, ib}) data.push_back(parse_double(tok[c], "color") / 255.0);
  }
  PointCloud cloud(color ? 6 : 3, std::move(data));
  cloud.validate();
  return cloud;
}

PointCloud read_ply(const std::filesystem::path& path) { return decode_ply(slurp(path)); }

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<std::string>& comments) {
  std::ostringstream os;
  for (const auto& c : comments) os << "# " << c << "\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t c = 0; c < cloud.channels(); ++c) os << (c ? " " : "") << fmt_double(cloud(i, c));
    os << '\n';
  }
  spit(path, os.str());
}

PointCloud read_xyz(const std::filesystem::path& path) {
  std::istringstream is(slurp(path));
  std::string line;
  std::vector<double> data;
  std::size_t channels = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string t;
    while (ls >> t) row.push_back(parse_double(t, "coordinate"));
    if (row.empty()) continue;
    if (channels == 0) channels = row.size();
    if (row.size() != channels || (channels != 3 && channels != 6))
      throw FormatError("inconsistent column count in " + path.string());
    data.insert(data.end(), row.begin(), row.end());
  }
  PointCloud cloud(channels == 0 ? 3 : channels, std::move(data));
  cloud.validate();
  return cloud;
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                       const std::vector<std::string>& comments) {
  if (path.extension() == ".ply")
    write_ply(path, cloud, comments);
  else
    write_xyz(path, cloud, comments);
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  return path.extension() == ".ply" ? read_ply(path) : read_xyz(path);
}

}  // namespace tdcr::pc
