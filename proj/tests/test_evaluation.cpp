#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "keyhole/evaluation.hpp"
#include "keyhole/glyphs.hpp"

using namespace keyhole;

namespace {

Image random_image(int rows, int cols, std::uint64_t seed) {
    Image img(rows, cols);
    Rng rng(seed);
    for (double& v : img.data)
        v = rng.u01();
    return img;
}

// Small blob with smooth edges; survives bilinear resampling almost exactly,
// unlike hard-edged content.
Image gaussian_blob(int rows, int cols, double sigma) {
    Image img(rows, cols);
    const double cr = (rows - 1) / 2.0, cc = (cols - 1) / 2.0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            img.at(r, c) = std::exp(-((r - cr) * (r - cr) + (c - cc) * (c - cc)) /
                                    (2.0 * sigma * sigma));
    return img;
}

} // namespace

TEST_CASE("ssim of an image with itself is exactly one") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const Image x = random_image(13, 9, seed);
        CHECK(ssim(x, x) == 1.0);
    }
    SSIMParams gauss;
    gauss.window = SSIMWindow::gaussian11;
    const Image big = random_image(12, 15, 4);
    CHECK(ssim(big, big, gauss) == 1.0);
    CHECK_THROWS_AS(ssim(random_image(10, 10, 5), random_image(10, 10, 5), gauss),
                    std::invalid_argument);
}

TEST_CASE("ssim is symmetric under the joint dynamic range") {
    for (std::uint64_t seed : {10ull, 11ull, 12ull}) {
        const Image a = random_image(16, 16, seed);
        const Image b = random_image(16, 16, seed + 100);
        CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-13));
    }
}

TEST_CASE("constant images reduce to the closed-form luminance term") {
    const double c1 = 1.0, c2 = 0.5;
    const Image a(6, 6, c1);
    const Image b(6, 6, c2);
    // all variances and covariances vanish; range = |c1 - c2|
    const double range = c1 - c2;
    const double C1 = 0.01 * range * 0.01 * range;
    const double want = (2.0 * c1 * c2 + C1) / (c1 * c1 + c2 * c2 + C1);
    CHECK(ssim(a, b) == doctest::Approx(want).epsilon(1e-13));

    // an explicit dynamic range overrides the joint one
    SSIMParams wide;
    wide.dynamic_range = 1.0;
    const double C1w = 0.01 * 0.01;
    const double wantw = (2.0 * c1 * c2 + C1w) / (c1 * c1 + c2 * c2 + C1w);
    CHECK(ssim(a, b, wide) == doctest::Approx(wantw).epsilon(1e-13));
}

TEST_CASE("structurally different images score low") {
    Image left(16, 16), right(16, 16);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) {
            left.at(r, c) = c < 8 ? 1.0 : 0.0;
            right.at(r, c) = c < 8 ? 0.0 : 1.0;
        }
    CHECK(ssim(left, right) < 0.5);
    CHECK_THROWS_AS(ssim(left, random_image(8, 8, 1)), std::invalid_argument);
}

TEST_CASE("identity transform is bitwise") {
    const Image x = random_image(11, 7, 20);
    CHECK(transform_image(x, RTFTransform{}).data == x.data);
    CHECK(RTFTransform{}.identity());
}

TEST_CASE("flips are involutions and translations shift with zero fill") {
    const Image x = random_image(9, 9, 21);
    RTFTransform h;
    h.flip_horizontal = true;
    CHECK(transform_image(transform_image(x, h), h).data == x.data);
    RTFTransform v;
    v.flip_vertical = true;
    CHECK(transform_image(transform_image(x, v), v).data == x.data);

    Image tiny(2, 3);
    tiny.data = {1, 2, 3, 4, 5, 6};
    RTFTransform right;
    right.dx = 1;
    CHECK(transform_image(tiny, right).data == std::vector<double>{0, 1, 2, 0, 4, 5});
    RTFTransform down;
    down.dy = 1;
    CHECK(transform_image(tiny, down).data == std::vector<double>{0, 0, 0, 1, 2, 3});
    RTFTransform out;
    out.dx = -3; // everything leaves the canvas
    for (double val : transform_image(tiny, out).data)
        CHECK(val == 0.0);
}

TEST_CASE("half-turn rotation round-trips") {
    const Image x = random_image(10, 12, 22);
    RTFTransform half;
    half.rotation = 180.0;
    const Image twice = transform_image(transform_image(x, half), half);
    for (size_t j = 0; j < x.data.size(); ++j)
        CHECK(twice.data[j] == doctest::Approx(x.data[j]).epsilon(1e-9));

    // order is flip, then rotation, then translation
    RTFTransform combo;
    combo.flip_horizontal = true;
    combo.rotation = 180.0;
    const Image via_combo = transform_image(x, combo);
    RTFTransform flip_only;
    flip_only.flip_horizontal = true;
    const Image manual = transform_image(transform_image(x, flip_only), half);
    for (size_t j = 0; j < x.data.size(); ++j)
        CHECK(via_combo.data[j] == doctest::Approx(manual.data[j]).epsilon(1e-12));
}

TEST_CASE("peak normalization") {
    Image x(2, 2);
    x.data = {0.5, 2.0, 1.0, 0.25};
    const Image n = max_normalize(x);
    CHECK(n.data == std::vector<double>{0.25, 1.0, 0.5, 0.125});
    const Image zero(3, 3, 0.0);
    CHECK(max_normalize(zero).data == zero.data);
}

TEST_CASE("disambiguation never scores below the plain comparison") {
    DisambiguationSearch quick;
    quick.translation_radius = 2;
    quick.rotation_step = 45.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Image a = random_image(12, 12, 1000 + seed);
        const Image b = random_image(12, 12, 2000 + seed);
        const double plain = ssim(max_normalize(a), max_normalize(b));
        const auto result = disambiguated_ssim(a, b, quick);
        CHECK(result.score >= plain - 1e-12);
    }
}

TEST_CASE("a matching pair is found at the identity") {
    const Image x = gaussian_blob(12, 12, 2.0);
    DisambiguationSearch quick;
    quick.translation_radius = 1;
    quick.rotation_step = 90.0;
    const auto self = disambiguated_ssim(x, x, quick);
    CHECK(self.score == 1.0);
    CHECK(self.transform.identity()); // ties break toward the identity
}

TEST_CASE("planted transforms are recovered") {
    // smooth content, modest shifts: nothing leaves the canvas, so the
    // planted warp stays in the search set and scores near one
    const Image x = gaussian_blob(16, 16, 2.5);
    DisambiguationSearch search;
    search.rotation_step = 90.0;
    search.translation_radius = 2;

    std::vector<RTFTransform> planted;
    for (double rot : {0.0, 90.0, 180.0, 270.0})
        for (int dx : {-1, 0, 1})
            for (int dy : {-1, 0, 1})
                for (bool fh : {false, true}) {
                    RTFTransform t;
                    t.rotation = rot;
                    t.dx = dx;
                    t.dy = dy;
                    t.flip_horizontal = fh;
                    planted.push_back(t);
                }

    for (const auto& t : planted) {
        const Image warped = transform_image(x, t);
        const auto result = disambiguated_ssim(x, warped, search);
        CHECK(result.score >= 0.99);
    }
}

TEST_CASE("wider searches only improve the score") {
    const Image a = gaussian_blob(12, 12, 2.0);
    Image b = transform_image(a, [] {
        RTFTransform t;
        t.rotation = 90.0;
        t.dx = 1;
        return t;
    }());
    DisambiguationSearch narrow;
    narrow.include_rotations = false;
    narrow.translation_radius = 1;
    DisambiguationSearch wide = narrow;
    wide.include_rotations = true;
    wide.rotation_step = 90.0;
    const double ns = disambiguated_ssim(a, b, narrow).score;
    const double ws = disambiguated_ssim(a, b, wide).score;
    CHECK(ws >= ns);
    CHECK(ws >= 0.99);

    DisambiguationSearch bad;
    bad.rotation_step = 7.0; // does not divide 360
    CHECK_THROWS_AS(disambiguated_ssim(a, b, bad), std::invalid_argument);
    bad = DisambiguationSearch{};
    bad.translation_radius = -2;
    CHECK_THROWS_AS(disambiguated_ssim(a, b, bad), std::invalid_argument);
}

TEST_CASE("transform descriptions are distinct and readable") {
    RTFTransform t;
    CHECK(!describe(t).empty());
    RTFTransform u;
    u.rotation = 90.0;
    u.dx = -2;
    u.flip_vertical = true;
    CHECK(describe(u) != describe(t));
}

TEST_CASE("trajectory rmse with and without the unobservable shift") {
    TrajectorySet truth;
    truth.plane = PlaneKind::constant_z;
    truth.poses = {{{0.0, 0.0, 1.0}, 0.0}, {{1.0, 0.0, 1.0}, 0.0}};
    TrajectorySet est = truth;
    CHECK(trajectory_rmse(est, truth, false) == 0.0);
    CHECK(trajectory_rmse(est, truth, true) == doctest::Approx(0.0));

    // constant offset: removed by the global shift, fully counted otherwise
    for (auto& pose : est.poses)
        pose.translation = pose.translation + Vec3{0.3, -0.4, 0.0};
    CHECK(trajectory_rmse(est, truth, false) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(trajectory_rmse(est, truth, true) == doctest::Approx(0.0).epsilon(1e-9));

    // antisymmetric displacements survive centering
    TrajectorySet skew = truth;
    skew.poses[0].translation = truth.poses[0].translation + Vec3{1.0, 0.0, 0.0};
    skew.poses[1].translation = truth.poses[1].translation + Vec3{0.0, 1.0, 0.0};
    CHECK(trajectory_rmse(skew, truth, false) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(trajectory_rmse(skew, truth, true) ==
          doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));

    TrajectorySet shorter = truth;
    shorter.poses.pop_back();
    CHECK_THROWS_AS(trajectory_rmse(shorter, truth, false), std::invalid_argument);
}

TEST_CASE("glyphs survive the evaluation pipeline") {
    // sanity tie between modules: a glyph against its translated self scores
    // high once disambiguated, low when compared directly
    const Image glyph = test_glyph(0);
    RTFTransform shift;
    shift.dx = 2;
    shift.dy = -1;
    const Image moved = transform_image(glyph, shift);
    DisambiguationSearch search;
    search.include_rotations = false;
    search.translation_radius = 3;
    const auto result = disambiguated_ssim(glyph, moved, search);
    CHECK(result.score >= 0.98);
    CHECK(result.transform.dx == -2);
    CHECK(result.transform.dy == 1);
    CHECK(ssim(glyph, moved) < result.score);
}
