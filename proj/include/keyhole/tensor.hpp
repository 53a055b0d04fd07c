#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace keyhole {

// Dense row-major 2D array of doubles.
struct Image {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Image() = default;
    Image(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    std::int64_t size() const { return static_cast<std::int64_t>(rows) * cols; }
    bool same_shape(const Image& o) const { return rows == o.rows && cols == o.cols; }
};

double max_value(const Image& img);
double min_value(const Image& img);

// "KHT1" tensor container: magic bytes KHT1, u32 rank, u32 dims[rank],
// little-endian float32 payload in row-major order.
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;

    std::int64_t element_count() const;
};

void write_kht1(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_kht1(const std::filesystem::path& path);

Tensor tensor_from_image(const Image& img);
Image image_from_tensor(const Tensor& tensor);

// PGM (P5, maxval 255) previews and object inputs. Reads return values in [0, 1].
Image read_pgm(const std::filesystem::path& path);
// Writes img scaled so its max maps to 255 (all-zero images stay black).
void write_pgm(const std::filesystem::path& path, const Image& img);

} // namespace keyhole
