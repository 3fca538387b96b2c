#pragma once

#include <Eigen/Geometry>

namespace siagent {

// World and body frames are right-handed, +y up, meters. The user faces -z,
// so +x is the user's right.
using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

struct Pose {
    Vec3 position = Vec3::Zero();
    Quat rotation = Quat::Identity();

    bool operator==(const Pose& other) const {
        return position == other.position && rotation.coeffs() == other.rotation.coeffs();
    }
};

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

inline bool is_unit(const Quat& q, double tolerance = 1e-6) {
    return q.coeffs().allFinite() && std::abs(q.norm() - 1.0) <= tolerance;
}

/// Geodesic angle between two orientations, degrees.
double angle_between_deg(const Quat& a, const Quat& b);

double deg_to_rad(double deg);
double rad_to_deg(double rad);

}  // namespace siagent
