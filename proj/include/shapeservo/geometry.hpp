#pragma once

#include <Eigen/Dense>
#include <vector>

#include "shapeservo/errors.hpp"

namespace shapeservo {

// Stacked Cartesian positions of the sampled backbone points, millimetres,
// base frame. Index 0 is the distal endpoint, the last index the base
// attachment.
struct BackbonePoints {
    std::vector<Eigen::Vector3d> points;

    int count() const { return static_cast<int>(points.size()); }

    // Flattened view r = [r_1^T r_2^T ... r_l^T]^T in R^{3l}.
    Eigen::VectorXd stacked() const;
    static BackbonePoints from_stacked(const Eigen::VectorXd& r);
};

enum class FeatureKind {
    TwoPoints,  // m = 6: distal endpoint + middle point positions
    Bta,        // m = 2: bending angle, twist angle
    DepBta,     // m = 6: distal endpoint + [kappa1 kappa2 phi]
};

int feature_dim(FeatureKind kind);
const char* feature_kind_name(FeatureKind kind);
FeatureKind feature_kind_from_name(const std::string& name);

// Indices into BackbonePoints. `middle` is the section midpoint for
// single-section features (TwoPoints, BTA) and the section junction for
// DepBta, where per-section midpoints are derived by index midpoint.
struct SectionMarkers {
    int distal = 0;
    int middle = 0;
    int base = 0;
};

struct ShapeFeature {
    FeatureKind kind = FeatureKind::TwoPoints;
    Eigen::VectorXd values;  // mm for positions, degrees for angles
};

// Angle at r2 between the lines r2->r1 and r2->r3, degrees in (0, 180].
// Throws CoincidentPoints when either leg is shorter than `tol` mm.
double bending_angle(const Eigen::Vector3d& r1, const Eigen::Vector3d& r2,
                     const Eigen::Vector3d& r3, double tol = 1e-9);

// atan2(z_e, y_e) in degrees, range (-180, 180]. Throws DegenerateTwist when
// y_e^2 + z_e^2 < tol^2.
double twist_angle(const Eigen::Vector3d& r_e, double tol = 1e-9);

ShapeFeature extract_feature(FeatureKind kind, const BackbonePoints& r,
                             const SectionMarkers& markers);

// Analytic Jacobian d feature / d stacked-points, m x 3l. Test oracle only;
// the controller never uses it. Throws NearSingularFeature when a bending
// angle is within 0.01 degrees of 0 or 180 (arccos gradient unbounded).
Eigen::MatrixXd feature_jacobian(FeatureKind kind, const BackbonePoints& r,
                                 const SectionMarkers& markers);

namespace detail {
// Midpoint indices used for the DepBta per-section bending angles.
int index_midpoint(int a, int b);
void validate_markers(const SectionMarkers& markers, int l);
}  // namespace detail

}  // namespace shapeservo
