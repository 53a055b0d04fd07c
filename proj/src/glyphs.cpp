#include "keyhole/glyphs.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace keyhole {
namespace {

struct Stroke {
    double x0, y0, x1, y1; // pixel coordinates, x right, y down
    double width;
};

// Marks every pixel whose center lies within width/2 of the segment.
void draw(Image& img, const Stroke& s) {
    const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
    const double len2 = dx * dx + dy * dy;
    const double half = s.width / 2.0;
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            const double px = c - s.x0, py = r - s.y0;
            double t = len2 > 0.0 ? (px * dx + py * dy) / len2 : 0.0;
            t = std::min(1.0, std::max(0.0, t));
            const double ex = px - t * dx, ey = py - t * dy;
            if (ex * ex + ey * ey <= half * half)
                img.at(r, c) = 1.0;
        }
    }
}

Image from_strokes(const std::vector<Stroke>& strokes) {
    Image img(64, 64);
    for (const auto& s : strokes)
        draw(img, s);
    return img;
}

} // namespace

Image test_glyph(int index) {
    switch (index) {
    case 0:
        // A lambda-like pair of diagonals with a short tail.
        return from_strokes({
            {14, 10, 44, 54, 5.0},
            {30, 33, 12, 54, 5.0},
            {40, 14, 50, 8, 4.0},
        });
    case 1:
        // A four-like open triangle with a long descender.
        return from_strokes({
            {40, 8, 16, 36, 5.0},
            {16, 36, 50, 36, 5.0},
            {40, 8, 40, 56, 5.0},
        });
    case 2:
        // An r-like stem with a hooked arm and a foot serif.
        return from_strokes({
            {20, 10, 20, 54, 5.0},
            {20, 18, 40, 12, 5.0},
            {40, 12, 46, 24, 4.0},
            {14, 54, 34, 54, 4.0},
        });
    default:
        throw std::invalid_argument("glyph index out of range");
    }
}

} // namespace keyhole
