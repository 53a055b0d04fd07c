// Writes the built-in glyph objects as pgm files, for configs and manual runs.
#include <filesystem>
#include <iostream>
#include <string>

#include "keyhole/glyphs.hpp"
#include "keyhole/tensor.hpp"

int main(int argc, char** argv) {
    const std::filesystem::path dir = argc > 1 ? argv[1] : ".";
    std::filesystem::create_directories(dir);
    for (int i = 0; i < keyhole::kGlyphCount; ++i) {
        const auto path = dir / ("glyph" + std::to_string(i) + ".pgm");
        keyhole::write_pgm(path, keyhole::test_glyph(i));
        std::cout << path.string() << "\n";
    }
    return 0;
}
