#pragma once

#include "keyhole/tensor.hpp"

namespace keyhole {

// Deterministic 64x64 binary glyphs with stroke structure similar to
// handwritten symbols. All three are asymmetric under flips and rotations so
// pose and disambiguation tests have a unique answer.
inline constexpr int kGlyphCount = 3;

Image test_glyph(int index);

} // namespace keyhole
