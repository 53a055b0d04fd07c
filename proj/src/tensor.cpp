#include "keyhole/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace keyhole {

double max_value(const Image& img) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : img.data) m = std::max(m, v);
    return m;
}

double min_value(const Image& img) {
    double m = std::numeric_limits<double>::infinity();
    for (double v : img.data) m = std::min(m, v);
    return m;
}

std::int64_t Tensor::element_count() const {
    std::int64_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("KHT1: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void write_kht1(const std::filesystem::path& path, const Tensor& tensor) {
    if (tensor.element_count() != static_cast<std::int64_t>(tensor.values.size()))
        throw std::invalid_argument("KHT1: dims do not match payload size");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write("KHT1", 4);
    put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
    for (std::uint32_t d : tensor.dims) put_u32(out, d);
    for (float v : tensor.values) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(out, bits);
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Tensor read_kht1(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "KHT1", 4) != 0)
        throw std::runtime_error("KHT1: bad magic in " + path.string());
    const std::uint32_t rank = get_u32(in);
    if (rank > 8) throw std::runtime_error("KHT1: implausible rank in " + path.string());
    Tensor t;
    t.dims.resize(rank);
    std::int64_t n = rank == 0 ? 0 : 1;
    for (std::uint32_t& d : t.dims) {
        d = get_u32(in);
        n *= d;
    }
    if (n < 0 || n > (1LL << 31)) throw std::runtime_error("KHT1: implausible size in " + path.string());
    t.values.resize(static_cast<size_t>(n));
    for (float& v : t.values) {
        const std::uint32_t bits = get_u32(in);
        std::memcpy(&v, &bits, 4);
    }
    return t;
}

Tensor tensor_from_image(const Image& img) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(img.rows), static_cast<std::uint32_t>(img.cols)};
    t.values.assign(img.data.begin(), img.data.end());
    return t;
}

Image image_from_tensor(const Tensor& tensor) {
    if (tensor.dims.size() != 2) throw std::runtime_error("expected a rank-2 tensor");
    Image img(static_cast<int>(tensor.dims[0]), static_cast<int>(tensor.dims[1]));
    std::copy(tensor.values.begin(), tensor.values.end(), img.data.begin());
    return img;
}

Image read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    auto next_token = [&in, &path]() {
        std::string tok;
        for (;;) {
            int ch = in.get();
            if (ch == EOF) throw std::runtime_error("PGM: truncated header in " + path.string());
            if (ch == '#') {
                while (ch != EOF && ch != '\n') ch = in.get();
                continue;
            }
            if (std::isspace(ch)) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(static_cast<char>(ch));
        }
    };
    if (next_token() != "P5") throw std::runtime_error("PGM: not a P5 file: " + path.string());
    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (w < 1 || h < 1) throw std::runtime_error("PGM: bad dimensions in " + path.string());
    if (maxval != 255) throw std::runtime_error("PGM: only maxval 255 supported: " + path.string());
    Image img(h, w);
    std::vector<unsigned char> row(static_cast<size_t>(w));
    for (int r = 0; r < h; ++r) {
        in.read(reinterpret_cast<char*>(row.data()), w);
        if (!in) throw std::runtime_error("PGM: truncated pixel data in " + path.string());
        for (int c = 0; c < w; ++c) img.at(r, c) = row[static_cast<size_t>(c)] / 255.0;
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "P5\n" << img.cols << " " << img.rows << "\n255\n";
    const double peak = max_value(img);
    const double scale = peak > 0.0 ? 255.0 / peak : 0.0;
    std::vector<unsigned char> row(static_cast<size_t>(img.cols));
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            const double v = std::clamp(img.at(r, c) * scale, 0.0, 255.0);
            row[static_cast<size_t>(c)] = static_cast<unsigned char>(std::lround(v));
        }
        out.write(reinterpret_cast<const char*>(row.data()), img.cols);
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

} // namespace keyhole
