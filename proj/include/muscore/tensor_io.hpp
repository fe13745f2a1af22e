#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "muscore/errors.hpp"

namespace muscore {

/// `.mt` container: 8-byte magic "MUSCTENS", u32-LE header length,
/// UTF-8 JSON header {"dtype": "f32"|"u8", "shape": [...]}, then the
/// little-endian row-major payload.
enum class Dtype { f32, u8 };

struct TensorFile {
    Dtype dtype = Dtype::f32;
    std::vector<std::size_t> shape;
    std::vector<float> f32;   // filled when dtype == f32
    std::vector<std::uint8_t> u8;  // filled when dtype == u8

    std::size_t element_count() const;

    static TensorFile from_f32(std::vector<std::size_t> shape, std::vector<float> data);
    static TensorFile from_u8(std::vector<std::size_t> shape, std::vector<std::uint8_t> data);
    static TensorFile from_matrix(const Eigen::MatrixXd& m);

    // [rows, cols] f32 tensor as a double matrix.
    Eigen::MatrixXd as_matrix() const;
};

TensorFile load_tensor(const std::string& path);
void save_tensor(const std::string& path, const TensorFile& tensor);

/// XYZ map at image resolution; the exact triple (0,0,0) marks an
/// invalid pixel.
struct OrganizedPointCloud {
    std::size_t height = 0;
    std::size_t width = 0;
    Eigen::MatrixXd points;          // V x 3, valid points in row-major pixel order
    std::vector<std::uint8_t> valid_mask;   // H*W, 1 where valid
    std::vector<std::int64_t> pixel_to_point;  // H*W, -1 for invalid pixels
    bool empty_warning = false;      // set when no pixel is valid
};

OrganizedPointCloud load_xyz_map(const std::string& path, std::size_t height, std::size_t width);
OrganizedPointCloud organize_xyz(const TensorFile& tensor);

}  // namespace muscore
