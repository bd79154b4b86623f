#include "shapeservo/geometry.hpp"

#include <cmath>

namespace shapeservo {

namespace {
constexpr double kRadToDeg = 180.0 / M_PI;
// Bending angles this close to 0/180 deg make the arccos gradient unbounded.
constexpr double kSingularAngleMarginDeg = 0.01;
}  // namespace

Eigen::VectorXd BackbonePoints::stacked() const {
    Eigen::VectorXd r(3 * count());
    for (int i = 0; i < count(); ++i) {
        r.segment<3>(3 * i) = points[static_cast<std::size_t>(i)];
    }
    return r;
}

BackbonePoints BackbonePoints::from_stacked(const Eigen::VectorXd& r) {
    if (r.size() % 3 != 0 || r.size() < 6) {
        throw DimensionMismatch("stacked point vector must have size 3l, l >= 2");
    }
    BackbonePoints out;
    out.points.resize(static_cast<std::size_t>(r.size() / 3));
    for (int i = 0; i < out.count(); ++i) {
        out.points[static_cast<std::size_t>(i)] = r.segment<3>(3 * i);
    }
    return out;
}

int feature_dim(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::TwoPoints: return 6;
        case FeatureKind::Bta: return 2;
        case FeatureKind::DepBta: return 6;
    }
    return 0;
}

const char* feature_kind_name(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::TwoPoints: return "two_points";
        case FeatureKind::Bta: return "bta";
        case FeatureKind::DepBta: return "dep_bta";
    }
    return "?";
}

FeatureKind feature_kind_from_name(const std::string& name) {
    if (name == "two_points") return FeatureKind::TwoPoints;
    if (name == "bta") return FeatureKind::Bta;
    if (name == "dep_bta") return FeatureKind::DepBta;
    throw ConfigError("unknown feature kind: " + name);
}

double bending_angle(const Eigen::Vector3d& r1, const Eigen::Vector3d& r2,
                     const Eigen::Vector3d& r3, double tol) {
    const Eigen::Vector3d u = r1 - r2;
    const Eigen::Vector3d v = r3 - r2;
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu < tol || nv < tol) {
        throw CoincidentPoints("bending angle legs shorter than tolerance");
    }
    double c = u.dot(v) / (nu * nv);
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c) * kRadToDeg;
}

double twist_angle(const Eigen::Vector3d& r_e, double tol) {
    const double y = r_e.y();
    const double z = r_e.z();
    if (y * y + z * z < tol * tol) {
        throw DegenerateTwist("twist angle undefined: endpoint on the x-axis");
    }
    return std::atan2(z, y) * kRadToDeg;
}

namespace detail {

int index_midpoint(int a, int b) { return (a + b) / 2; }

void validate_markers(const SectionMarkers& markers, int l) {
    auto in_range = [l](int i) { return i >= 0 && i < l; };
    if (!in_range(markers.distal) || !in_range(markers.middle) ||
        !in_range(markers.base)) {
        throw BadMarkers("section marker index out of range");
    }
    if (markers.distal == markers.middle || markers.middle == markers.base) {
        throw BadMarkers("section markers must be distinct");
    }
}

}  // namespace detail

ShapeFeature extract_feature(FeatureKind kind, const BackbonePoints& r,
                             const SectionMarkers& markers) {
    if (r.count() < 2) {
        throw BadMarkers("need at least two backbone points");
    }
    detail::validate_markers(markers, r.count());
    const auto& pts = r.points;
    auto at = [&pts](int i) -> const Eigen::Vector3d& {
        return pts[static_cast<std::size_t>(i)];
    };

    ShapeFeature out;
    out.kind = kind;
    out.values.resize(feature_dim(kind));
    switch (kind) {
        case FeatureKind::TwoPoints:
            out.values.segment<3>(0) = at(markers.distal);
            out.values.segment<3>(3) = at(markers.middle);
            break;
        case FeatureKind::Bta:
            out.values(0) =
                bending_angle(at(markers.distal), at(markers.middle), at(markers.base));
            out.values(1) = twist_angle(at(markers.distal));
            break;
        case FeatureKind::DepBta: {
            const int mid1 = detail::index_midpoint(markers.distal, markers.middle);
            const int mid2 = detail::index_midpoint(markers.middle, markers.base);
            out.values.segment<3>(0) = at(markers.distal);
            out.values(3) = bending_angle(at(markers.distal), at(mid1), at(markers.middle));
            out.values(4) = bending_angle(at(markers.middle), at(mid2), at(markers.base));
            out.values(5) = twist_angle(at(markers.middle));
            break;
        }
    }
    return out;
}

namespace {

// Gradient of the bending angle (degrees) w.r.t. the three points; each
// output block is 1x3. Throws NearSingularFeature near 0/180 deg.
void bending_angle_gradient(const Eigen::Vector3d& r1, const Eigen::Vector3d& r2,
                            const Eigen::Vector3d& r3, Eigen::Vector3d& g1,
                            Eigen::Vector3d& g2, Eigen::Vector3d& g3) {
    const Eigen::Vector3d u = r1 - r2;
    const Eigen::Vector3d v = r3 - r2;
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu < 1e-9 || nv < 1e-9) {
        throw CoincidentPoints("bending angle legs shorter than tolerance");
    }
    double c = u.dot(v) / (nu * nv);
    c = std::clamp(c, -1.0, 1.0);
    const double angle_deg = std::acos(c) * kRadToDeg;
    if (angle_deg > 180.0 - kSingularAngleMarginDeg ||
        angle_deg < kSingularAngleMarginDeg) {
        throw NearSingularFeature("bending angle within tolerance of 0/180 deg");
    }
    const double s = std::sqrt(1.0 - c * c);
    // d(acos c)/dc = -1/sqrt(1-c^2); chain through c = u.v/(|u||v|).
    const Eigen::Vector3d dc_du = v / (nu * nv) - c * u / (nu * nu);
    const Eigen::Vector3d dc_dv = u / (nu * nv) - c * v / (nv * nv);
    const double scale = -kRadToDeg / s;
    g1 = scale * dc_du;
    g3 = scale * dc_dv;
    g2 = -(g1 + g3);
}

// Gradient of the twist angle (degrees) w.r.t. the endpoint.
Eigen::Vector3d twist_angle_gradient(const Eigen::Vector3d& r_e) {
    const double y = r_e.y();
    const double z = r_e.z();
    const double d2 = y * y + z * z;
    if (d2 < 1e-18) {
        throw DegenerateTwist("twist angle undefined: endpoint on the x-axis");
    }
    return Eigen::Vector3d(0.0, -z / d2, y / d2) * kRadToDeg;
}

}  // namespace

Eigen::MatrixXd feature_jacobian(FeatureKind kind, const BackbonePoints& r,
                                 const SectionMarkers& markers) {
    detail::validate_markers(markers, r.count());
    const int l = r.count();
    const int m = feature_dim(kind);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, 3 * l);
    const auto& pts = r.points;
    auto at = [&pts](int i) -> const Eigen::Vector3d& {
        return pts[static_cast<std::size_t>(i)];
    };
    auto put = [&J](int row, int point, const Eigen::Vector3d& g) {
        J.block<1, 3>(row, 3 * point) += g.transpose();
    };
    auto selector = [&J](int row0, int point) {
        for (int a = 0; a < 3; ++a) J(row0 + a, 3 * point + a) = 1.0;
    };

    switch (kind) {
        case FeatureKind::TwoPoints:
            selector(0, markers.distal);
            selector(3, markers.middle);
            break;
        case FeatureKind::Bta: {
            Eigen::Vector3d g1, g2, g3;
            bending_angle_gradient(at(markers.distal), at(markers.middle),
                                   at(markers.base), g1, g2, g3);
            put(0, markers.distal, g1);
            put(0, markers.middle, g2);
            put(0, markers.base, g3);
            put(1, markers.distal, twist_angle_gradient(at(markers.distal)));
            break;
        }
        case FeatureKind::DepBta: {
            const int mid1 = detail::index_midpoint(markers.distal, markers.middle);
            const int mid2 = detail::index_midpoint(markers.middle, markers.base);
            selector(0, markers.distal);
            Eigen::Vector3d g1, g2, g3;
            bending_angle_gradient(at(markers.distal), at(mid1), at(markers.middle),
                                   g1, g2, g3);
            put(3, markers.distal, g1);
            put(3, mid1, g2);
            put(3, markers.middle, g3);
            bending_angle_gradient(at(markers.middle), at(mid2), at(markers.base),
                                   g1, g2, g3);
            put(4, markers.middle, g1);
            put(4, mid2, g2);
            put(4, markers.base, g3);
            put(5, markers.middle, twist_angle_gradient(at(markers.middle)));
            break;
        }
    }
    return J;
}

}  // namespace shapeservo
