#pragma once

#include <string>

#include "sslam/pointcloud.hpp"
#include "sslam/surfel_map.hpp"

namespace sslam {

/// Binary little-endian PLY: float x/y/z, nx/ny/nz, uchar red/green/blue.
void write_ply_points(const std::string& path, const PointCloud& pc);

/// Reads any binary little-endian PLY whose first element is `vertex` with
/// at least float/double x,y,z; normals and colors are picked up when
/// present (uchar colors rescaled to [0,1]).
PointCloud read_ply_points(const std::string& path);

/// Surfel map layout: float x/y/z (center), nx/ny/nz (normal), tux/tuy/tuz
/// (first tangent), su/sv (linear scales), opacity (post-sigmoid), and float
/// red/green/blue. The second tangent is normal x tangent_u by convention.
void write_ply_surfels(const std::string& path, const SurfelMap& map);
SurfelMap read_ply_surfels(const std::string& path);

}  // namespace sslam
