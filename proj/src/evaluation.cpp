#include "keyhole/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "keyhole/parallel.hpp"

namespace keyhole {
namespace {

constexpr double kPi = 3.14159265358979323846;

void check_pair(const Image& a, const Image& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument("images must share a shape");
    if (a.rows <= 0 || a.cols <= 0)
        throw std::invalid_argument("images must be nonempty");
    for (double v : a.data)
        if (!std::isfinite(v))
            throw std::invalid_argument("image values must be finite");
    for (double v : b.data)
        if (!std::isfinite(v))
            throw std::invalid_argument("image values must be finite");
}

double joint_range(const Image& a, const Image& b) {
    double lo = a.data[0], hi = a.data[0];
    for (double v : a.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : b.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi - lo;
    return range > 0.0 ? range : 1.0;
}

double resolve_range(const Image& a, const Image& b, const SSIMParams& params) {
    if (params.dynamic_range < 0.0 || !std::isfinite(params.dynamic_range))
        throw std::invalid_argument("dynamic range must be nonnegative and finite");
    return params.dynamic_range > 0.0 ? params.dynamic_range : joint_range(a, b);
}

// Summed-area table, (rows+1) x (cols+1): entry (r, c) holds the sum over
// img[0..r) x [0..c).
void build_sat(const Image& img, const Image* other, std::vector<double>& sat) {
    const int rows = img.rows, cols = img.cols;
    sat.assign(static_cast<std::size_t>(rows + 1) * (cols + 1), 0.0);
    for (int r = 0; r < rows; ++r) {
        const double* row = img.data.data() + static_cast<std::size_t>(r) * cols;
        const double* orow =
            other ? other->data.data() + static_cast<std::size_t>(r) * cols : nullptr;
        double* cur = sat.data() + static_cast<std::size_t>(r + 1) * (cols + 1);
        const double* prev = sat.data() + static_cast<std::size_t>(r) * (cols + 1);
        double run = 0.0;
        for (int c = 0; c < cols; ++c) {
            run += orow ? row[c] * orow[c] : row[c];
            cur[c + 1] = prev[c + 1] + run;
        }
    }
}

inline double window_sum(const std::vector<double>& sat, int stride, int r0, int c0, int wh, int ww) {
    const std::size_t top = static_cast<std::size_t>(r0) * stride;
    const std::size_t bot = static_cast<std::size_t>(r0 + wh) * stride;
    return sat[bot + c0 + ww] - sat[top + c0 + ww] - sat[bot + c0] + sat[top + c0];
}

struct SsimScratch {
    std::vector<double> sa, saa, sb, sbb, sab;
};

// Uniform-window SSIM from summed-area tables. Identical inputs give exactly
// 1: every sum is computed by the same code path, so numerator and
// denominator match bitwise per window.
double ssim_uniform(const Image& a, const Image& b, double c1, double c2, SsimScratch& s,
                    bool rebuild_a) {
    const int rows = a.rows, cols = a.cols;
    const int wh = std::min(8, rows), ww = std::min(8, cols);
    const int stride = cols + 1;
    if (rebuild_a) {
        build_sat(a, nullptr, s.sa);
        build_sat(a, &a, s.saa);
    }
    build_sat(b, nullptr, s.sb);
    build_sat(b, &b, s.sbb);
    build_sat(a, &b, s.sab);

    const double n = static_cast<double>(wh) * ww;
    double total = 0.0;
    std::int64_t count = 0;
    for (int r0 = 0; r0 + wh <= rows; ++r0) {
        for (int c0 = 0; c0 + ww <= cols; ++c0) {
            const double mu_a = window_sum(s.sa, stride, r0, c0, wh, ww) / n;
            const double mu_b = window_sum(s.sb, stride, r0, c0, wh, ww) / n;
            const double va = window_sum(s.saa, stride, r0, c0, wh, ww) / n - mu_a * mu_a;
            const double vb = window_sum(s.sbb, stride, r0, c0, wh, ww) / n - mu_b * mu_b;
            const double vab = window_sum(s.sab, stride, r0, c0, wh, ww) / n - mu_a * mu_b;
            const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * vab + c2);
            const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

double ssim_gaussian(const Image& a, const Image& b, double c1, double c2) {
    const int rows = a.rows, cols = a.cols;
    constexpr int w = 11;
    if (rows < w || cols < w)
        throw std::invalid_argument("gaussian SSIM window needs an image of at least 11x11");
    static const std::vector<double> kernel = [] {
        std::vector<double> k(w * w);
        double sum = 0.0;
        for (int i = 0; i < w; ++i)
            for (int j = 0; j < w; ++j) {
                const double di = i - 5.0, dj = j - 5.0;
                k[i * w + j] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
                sum += k[i * w + j];
            }
        for (double& v : k)
            v /= sum;
        return k;
    }();

    double total = 0.0;
    std::int64_t count = 0;
    for (int r0 = 0; r0 + w <= rows; ++r0) {
        for (int c0 = 0; c0 + w <= cols; ++c0) {
            double mu_a = 0.0, mu_b = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
            for (int i = 0; i < w; ++i) {
                const double* ra = a.data.data() + static_cast<std::size_t>(r0 + i) * cols + c0;
                const double* rb = b.data.data() + static_cast<std::size_t>(r0 + i) * cols + c0;
                const double* kr = kernel.data() + i * w;
                for (int j = 0; j < w; ++j) {
                    mu_a += kr[j] * ra[j];
                    mu_b += kr[j] * rb[j];
                    saa += kr[j] * ra[j] * ra[j];
                    sbb += kr[j] * rb[j] * rb[j];
                    sab += kr[j] * ra[j] * rb[j];
                }
            }
            const double va = saa - mu_a * mu_a;
            const double vb = sbb - mu_b * mu_b;
            const double vab = sab - mu_a * mu_b;
            const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * vab + c2);
            const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

Image flip_image(const Image& img, bool horizontal, bool vertical) {
    if (!horizontal && !vertical)
        return img;
    Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r) {
        const int sr = vertical ? img.rows - 1 - r : r;
        for (int c = 0; c < img.cols; ++c) {
            const int sc = horizontal ? img.cols - 1 - c : c;
            out.at(r, c) = img.at(sr, sc);
        }
    }
    return out;
}

Image rotate_image(const Image& img, double degrees) {
    if (degrees == 0.0)
        return img;
    Image out(img.rows, img.cols);
    const double rad = degrees * kPi / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cr = (img.rows - 1) / 2.0, cc = (img.cols - 1) / 2.0;
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            // Inverse map: rotate the destination offset by -degrees. Image
            // rows grow downward, so v = -(row - center).
            const double u = c - cc, v = -(r - cr);
            const double su = u * cs + v * sn;
            const double sv = -u * sn + v * cs;
            const double src_c = cc + su, src_r = cr - sv;
            const double fr = std::floor(src_r), fc = std::floor(src_c);
            const int r0 = static_cast<int>(fr), c0 = static_cast<int>(fc);
            const double wr = src_r - fr, wc = src_c - fc;
            double acc = 0.0;
            for (int dr = 0; dr <= 1; ++dr) {
                for (int dc = 0; dc <= 1; ++dc) {
                    const int rr = r0 + dr, cc2 = c0 + dc;
                    if (rr < 0 || rr >= img.rows || cc2 < 0 || cc2 >= img.cols)
                        continue;
                    const double wgt = (dr ? wr : 1.0 - wr) * (dc ? wc : 1.0 - wc);
                    acc += wgt * img.at(rr, cc2);
                }
            }
            out.at(r, c) = acc;
        }
    }
    return out;
}

void shift_into(const Image& img, int dx, int dy, Image& out) {
    std::fill(out.data.begin(), out.data.end(), 0.0);
    for (int r = 0; r < img.rows; ++r) {
        const int sr = r - dy;
        if (sr < 0 || sr >= img.rows)
            continue;
        const int c_lo = std::max(0, dx), c_hi = std::min(img.cols, img.cols + dx);
        for (int c = c_lo; c < c_hi; ++c)
            out.at(r, c) = img.at(sr, c - dx);
    }
}

} // namespace

double ssim(const Image& a, const Image& b, const SSIMParams& params) {
    check_pair(a, b);
    const double range = resolve_range(a, b, params);
    const double c1 = (params.k1 * range) * (params.k1 * range);
    const double c2 = (params.k2 * range) * (params.k2 * range);
    if (params.window == SSIMWindow::gaussian11)
        return ssim_gaussian(a, b, c1, c2);
    SsimScratch scratch;
    return ssim_uniform(a, b, c1, c2, scratch, true);
}

Image transform_image(const Image& img, const RTFTransform& t) {
    if (img.rows <= 0 || img.cols <= 0)
        throw std::invalid_argument("image must be nonempty");
    if (!std::isfinite(t.rotation))
        throw std::invalid_argument("rotation must be finite");
    Image out = flip_image(img, t.flip_horizontal, t.flip_vertical);
    out = rotate_image(out, t.rotation);
    if (t.dx != 0 || t.dy != 0) {
        Image shifted(img.rows, img.cols);
        shift_into(out, t.dx, t.dy, shifted);
        return shifted;
    }
    return out;
}

std::string describe(const RTFTransform& t) {
    const char* flips = t.flip_horizontal ? (t.flip_vertical ? "hv" : "h")
                                          : (t.flip_vertical ? "v" : "none");
    char buf[96];
    std::snprintf(buf, sizeof buf, "rot=%g dx=%d dy=%d flip=%s", t.rotation, t.dx, t.dy, flips);
    return buf;
}

Image max_normalize(const Image& img) {
    double peak = 0.0;
    for (double v : img.data)
        peak = std::max(peak, v);
    if (!(peak > 0.0))
        return img;
    Image out = img;
    for (double& v : out.data)
        v /= peak;
    return out;
}

DisambiguationResult disambiguated_ssim(const Image& truth, const Image& estimate,
                                        const DisambiguationSearch& search,
                                        const SSIMParams& params) {
    check_pair(truth, estimate);
    if (!(search.rotation_step > 0.0) || !std::isfinite(search.rotation_step))
        throw std::invalid_argument("rotation step must be positive and finite");
    const double steps = 360.0 / search.rotation_step;
    if (std::fabs(steps - std::round(steps)) > 1e-9)
        throw std::invalid_argument("rotation step must divide 360");
    if (search.translation_step < 1)
        throw std::invalid_argument("translation step must be at least 1");
    if (search.translation_radius < -1)
        throw std::invalid_argument("translation radius must be -1 or nonnegative");

    const Image a = max_normalize(truth);
    const Image b = max_normalize(estimate);

    // One dynamic range for the whole search keeps candidate scores
    // comparable; zero-fill borders would otherwise perturb it per candidate.
    SSIMParams fixed = params;
    fixed.dynamic_range = resolve_range(a, b, params);
    const double c1 = (fixed.k1 * fixed.dynamic_range) * (fixed.k1 * fixed.dynamic_range);
    const double c2 = (fixed.k2 * fixed.dynamic_range) * (fixed.k2 * fixed.dynamic_range);

    const int nrot = search.include_rotations ? static_cast<int>(std::round(steps)) : 1;
    const int radius = search.translation_radius < 0 ? std::max(a.rows, a.cols) - 1
                                                     : search.translation_radius;
    const int m = radius / search.translation_step;
    const int ntrans = 2 * m + 1;
    std::vector<std::pair<bool, bool>> flips{{false, false}};
    if (search.include_horizontal_flip)
        flips.emplace_back(true, false);
    if (search.include_vertical_flip)
        flips.emplace_back(false, true);
    if (search.include_horizontal_flip && search.include_vertical_flip)
        flips.emplace_back(true, true);
    const int nflip = static_cast<int>(flips.size());

    // Scores are slotted by the lexicographic candidate index (rotation, dx,
    // dy, flip), so the serial arg-max below realizes the documented
    // tie-break no matter how the work was scheduled.
    const std::int64_t total = static_cast<std::int64_t>(nrot) * ntrans * ntrans * nflip;
    std::vector<double> scores(total, -std::numeric_limits<double>::infinity());
    const auto offset_of = [&](int idx) { return (idx - m) * search.translation_step; };

    for (int ri = 0; ri < nrot; ++ri) {
        const double rot = ri * search.rotation_step;
        for (int fi = 0; fi < nflip; ++fi) {
            const Image base =
                rotate_image(flip_image(b, flips[fi].first, flips[fi].second), rot);
            parallel_for(static_cast<std::int64_t>(ntrans) * ntrans,
                         [&](std::int64_t lo, std::int64_t hi) {
                             Image shifted(a.rows, a.cols);
                             SsimScratch scratch;
                             bool first = true;
                             for (std::int64_t ti = lo; ti < hi; ++ti) {
                                 const int xi = static_cast<int>(ti / ntrans);
                                 const int yi = static_cast<int>(ti % ntrans);
                                 shift_into(base, offset_of(xi), offset_of(yi), shifted);
                                 const double score =
                                     fixed.window == SSIMWindow::gaussian11
                                         ? ssim_gaussian(a, shifted, c1, c2)
                                         : ssim_uniform(a, shifted, c1, c2, scratch, first);
                                 first = false;
                                 const std::int64_t slot =
                                     ((static_cast<std::int64_t>(ri) * ntrans + xi) * ntrans + yi) *
                                         nflip +
                                     fi;
                                 scores[slot] = score;
                             }
                         });
        }
    }

    std::int64_t best = 0;
    for (std::int64_t i = 1; i < total; ++i)
        if (scores[i] > scores[best])
            best = i;

    DisambiguationResult result;
    result.score = scores[best];
    const int fi = static_cast<int>(best % nflip);
    const int yi = static_cast<int>((best / nflip) % ntrans);
    const int xi = static_cast<int>((best / nflip / ntrans) % ntrans);
    const int ri = static_cast<int>(best / nflip / ntrans / ntrans);
    result.transform.rotation = ri * search.rotation_step;
    result.transform.dx = offset_of(xi);
    result.transform.dy = offset_of(yi);
    result.transform.flip_horizontal = flips[fi].first;
    result.transform.flip_vertical = flips[fi].second;
    return result;
}

double trajectory_rmse(const TrajectorySet& estimated, const TrajectorySet& truth,
                       bool allow_global_shift) {
    if (estimated.length() != truth.length())
        throw std::invalid_argument("trajectories must share a length");
    if (estimated.length() == 0)
        throw std::invalid_argument("trajectories are empty");
    const std::int64_t n = estimated.length();
    Vec3 mean{};
    if (allow_global_shift) {
        for (std::int64_t i = 0; i < n; ++i)
            mean = mean + (estimated.poses[i].translation - truth.poses[i].translation);
        mean = mean * (1.0 / static_cast<double>(n));
    }
    double sum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const Vec3 e = estimated.poses[i].translation - truth.poses[i].translation - mean;
        sum += dot(e, e);
    }
    return std::sqrt(sum / static_cast<double>(n));
}

} // namespace keyhole
