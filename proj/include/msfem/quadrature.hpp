#pragma once

#include "msfem/mesh.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace msfem {

/// Quadrature on a triangle in barycentric coordinates. Weights sum to one and
/// are scaled by the triangle area at use.
struct QuadratureRule {
    std::string name;
    int degree = 0;
    std::vector<Eigen::Vector3d> points;
    std::vector<double> weights;

    std::size_t size() const noexcept { return points.size(); }

    Point map(const std::array<Point, 3>& tri, std::size_t q) const
    {
        const auto& l = points[q];
        return l[0] * tri[0] + l[1] * tri[1] + l[2] * tri[2];
    }

    static QuadratureRule centroid()
    {
        return {"centroid", 1, {Eigen::Vector3d::Constant(1.0 / 3.0)}, {1.0}};
    }

    static QuadratureRule edge_midpoint()
    {
        return {"edge-midpoint",
                2,
                {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}},
                {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
    }

    /// Degree-2 rule with interior points (2/3, 1/6, 1/6) and permutations.
    /// Never samples element edges, where layered coefficients jump.
    static QuadratureRule interior_three_point()
    {
        constexpr double a = 2.0 / 3.0, b = 1.0 / 6.0;
        return {"interior-3", 2, {{a, b, b}, {b, a, b}, {b, b, a}}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
    }

    /// Degree-5 rule with seven interior points.
    static QuadratureRule seven_point()
    {
        const double s = std::sqrt(15.0);
        const double a = (6.0 - s) / 21.0, b = (6.0 + s) / 21.0;
        const double wa = (155.0 - s) / 1200.0, wb = (155.0 + s) / 1200.0;
        return {"seven-point",
                5,
                {Eigen::Vector3d::Constant(1.0 / 3.0), {1 - 2 * a, a, a}, {a, 1 - 2 * a, a}, {a, a, 1 - 2 * a},
                 {1 - 2 * b, b, b}, {b, 1 - 2 * b, b}, {b, b, 1 - 2 * b}},
                {9.0 / 40.0, wa, wa, wa, wb, wb, wb}};
    }

    static QuadratureRule standard() { return interior_three_point(); }
};

} // namespace msfem
