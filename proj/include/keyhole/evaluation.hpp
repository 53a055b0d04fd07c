#pragma once

#include <string>

#include "keyhole/simulator.hpp"
#include "keyhole/tensor.hpp"

namespace keyhole {

enum class SSIMWindow { uniform8, gaussian11 };

struct SSIMParams {
    SSIMWindow window = SSIMWindow::uniform8;
    double k1 = 0.01;
    double k2 = 0.03;
    // 0 means derive the range as joint max - min over both inputs, which
    // keeps ssim symmetric in its arguments.
    double dynamic_range = 0.0;
};

// Mean local structural similarity over sliding windows (stride 1, valid
// positions only). The uniform window shrinks to the image when the image is
// smaller than 8x8; the 11x11 Gaussian window (sigma 1.5) requires the image
// to be at least 11x11.
double ssim(const Image& a, const Image& b, const SSIMParams& params = {});

// Applied as flip, then rotation about the image center (degrees ccw,
// bilinear, zero fill), then integer translation (dx right, dy down, zero
// fill). All-default parameters are the exact identity.
struct RTFTransform {
    double rotation = 0.0;
    int dx = 0;
    int dy = 0;
    bool flip_horizontal = false;
    bool flip_vertical = false;

    bool identity() const {
        return rotation == 0.0 && dx == 0 && dy == 0 && !flip_horizontal && !flip_vertical;
    }
};

Image transform_image(const Image& img, const RTFTransform& t);

std::string describe(const RTFTransform& t);

// Finite search grid over rotations, translations and flips. Rotations run
// 0, step, ..., 360 - step; translations run over multiples of
// translation_step within the radius (so 0 is always included); flip
// combinations follow the enabled axes. translation_radius -1 spans the full
// image extent. Rotations are typically enabled only where the imaging plane
// makes them a true ambiguity.
struct DisambiguationSearch {
    double rotation_step = 5.0; // degrees; must divide 360
    bool include_rotations = true;
    int translation_step = 1; // pixels
    int translation_radius = -1;
    bool include_horizontal_flip = true;
    bool include_vertical_flip = true;
};

struct DisambiguationResult {
    double score = 0.0;
    RTFTransform transform;
};

// Peak-normalized copy (divides by the max; zero images pass through).
Image max_normalize(const Image& img);

// max over the search grid of ssim(truth, rtf(estimate)), both inputs
// peak-normalized first. Ties break lexicographically on (rotation, dx, dy,
// horizontal flip, vertical flip), so the identity wins among equals.
DisambiguationResult disambiguated_ssim(const Image& truth, const Image& estimate,
                                        const DisambiguationSearch& search = {},
                                        const SSIMParams& params = {});

// Root-mean-square translation error between pose lists of equal length.
// allow_global_shift removes the mean displacement first, since a constant
// object/trajectory offset is unobservable in this geometry.
double trajectory_rmse(const TrajectorySet& estimated, const TrajectorySet& truth,
                       bool allow_global_shift);

} // namespace keyhole
