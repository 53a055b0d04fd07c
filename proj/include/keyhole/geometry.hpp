#pragma once

#include <cmath>
#include <stdexcept>

namespace keyhole {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

// Object pose: translation into the global frame plus an optional in-plane
// rotation (about the object's local z axis, radians).
struct RigidTransform {
    Vec3 translation;
    double rotation = 0.0;
};

// Maps a point from the object's local frame to the global frame.
inline Vec3 apply(const RigidTransform& pose, const Vec3& local) {
    if (pose.rotation == 0.0) return local + pose.translation;
    const double c = std::cos(pose.rotation);
    const double s = std::sin(pose.rotation);
    Vec3 r{c * local.x - s * local.y, s * local.x + c * local.y, local.z};
    return r + pose.translation;
}

// Axis held constant by a planar trajectory or candidate grid.
enum class PlaneKind { constant_x, constant_y, constant_z };

inline double plane_coordinate(PlaneKind plane, const Vec3& p) {
    switch (plane) {
        case PlaneKind::constant_x: return p.x;
        case PlaneKind::constant_y: return p.y;
        case PlaneKind::constant_z: return p.z;
    }
    throw std::logic_error("bad PlaneKind");
}

// The two axes that vary inside a plane, in (u, v) order.
inline Vec3 plane_point(PlaneKind plane, double u, double v, double fixed) {
    switch (plane) {
        case PlaneKind::constant_x: return {fixed, u, v};
        case PlaneKind::constant_y: return {u, fixed, v};
        case PlaneKind::constant_z: return {u, v, fixed};
    }
    throw std::logic_error("bad PlaneKind");
}

} // namespace keyhole
