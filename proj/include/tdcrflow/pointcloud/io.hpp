#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tdcrflow/pointcloud/point_cloud.hpp"

namespace tdcr::pc {

// ASCII PLY with "x y z [red green blue]" vertex properties. Colors are
// written as 0-255 integers and mapped to [0, 1] on read. `comments` become
// "comment" header lines.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<std::string>& comments = {});
std::string encode_ply(const PointCloud& cloud, const std::vector<std::string>& comments = {});
PointCloud read_ply(const std::filesystem::path& path);
PointCloud decode_ply(const std::string& text);

// Whitespace separated "x y z [r g b]" rows, colors in [0, 1]. Lines starting
// with '#' are comments.
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<std::string>& comments = {});
PointCloud read_xyz(const std::filesystem::path& path);

// Dispatches on the file extension (.ply, anything else is plain text).
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                       const std::vector<std::string>& comments = {});
PointCloud read_point_cloud(const std::filesystem::path& path);

}  // namespace tdcr::pc
