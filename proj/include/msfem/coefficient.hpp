#pragma once

// Catalog of diffusion coefficients and source terms.

#include "msfem/errors.hpp"
#include "msfem/mesh.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <numbers>
#include <string>
#include <variant>

namespace msfem {

using Tensor = Eigen::Matrix2d;

/// Anything that maps a point to a 2x2 diffusion tensor.
template <class F>
concept TensorField = requires(const F& f, const Point& x) {
    { f(x) } -> std::convertible_to<Tensor>;
};

template <class F>
concept ScalarField = requires(const F& f, const Point& x) {
    { f(x) } -> std::convertible_to<double>;
};

/// Ellipticity constants: xi.A xi >= m|xi|^2 and |eta.A xi| <= M|xi||eta|.
struct Bounds {
    double m = 1.0;
    double M = 1.0;
};

class CoefficientField {
public:
    struct ConstantScalar {
        double value;
    };
    struct ConstantMatrix {
        Tensor value;
    };
    /// (1 + amplitude cos^2(pi x1/eps) sin^2(pi x2/eps)) Id
    struct PaperPeriodic {
        double epsilon;
        double amplitude;
    };
    /// a(x1) Id with a = a_minus on [0, eps/2) and a_plus on [eps/2, eps), eps-periodic.
    struct Layered {
        double epsilon;
        double a_minus;
        double a_plus;
    };
    using Kind = std::variant<ConstantScalar, ConstantMatrix, PaperPeriodic, Layered>;

    static CoefficientField constant(double c)
    {
        if (!(c > 0.0) || !std::isfinite(c))
            throw InvalidArgument("constant coefficient must be positive");
        return CoefficientField(ConstantScalar{c}, {c, c});
    }

    static CoefficientField matrix(const Tensor& a)
    {
        const Tensor sym = 0.5 * (a + a.transpose());
        const double m = Eigen::SelfAdjointEigenSolver<Tensor>(sym).eigenvalues().minCoeff();
        const double M = Eigen::JacobiSVD<Tensor>(a).singularValues().maxCoeff();
        if (!(m > 0.0))
            throw InvalidArgument("constant matrix coefficient is not coercive");
        return CoefficientField(ConstantMatrix{a}, {m, M});
    }

    static CoefficientField paper_periodic(double epsilon, double amplitude = 100.0)
    {
        if (!(epsilon > 0.0))
            throw InvalidArgument("epsilon must be positive");
        if (!(amplitude >= 0.0))
            throw InvalidArgument("amplitude must be non-negative");
        return CoefficientField(PaperPeriodic{epsilon, amplitude}, {1.0, 1.0 + amplitude});
    }

    static CoefficientField layered(double epsilon, double a_minus, double a_plus)
    {
        if (!(epsilon > 0.0))
            throw InvalidArgument("epsilon must be positive");
        if (!(a_minus > 0.0) || !(a_plus > 0.0))
            throw InvalidArgument("layer values must be positive");
        return CoefficientField(Layered{epsilon, a_minus, a_plus},
                                {std::min(a_minus, a_plus), std::max(a_minus, a_plus)});
    }

    Tensor operator()(const Point& x) const
    {
        return std::visit([&](const auto& k) { return eval(k, x); }, kind_);
    }

    const Bounds& bounds() const noexcept { return bounds_; }
    const Kind& kind() const noexcept { return kind_; }

    /// Oscillation period, or 0 for constant coefficients.
    double epsilon() const
    {
        if (const auto* p = std::get_if<PaperPeriodic>(&kind_))
            return p->epsilon;
        if (const auto* l = std::get_if<Layered>(&kind_))
            return l->epsilon;
        return 0.0;
    }

    bool is_constant() const
    {
        return std::holds_alternative<ConstantScalar>(kind_) || std::holds_alternative<ConstantMatrix>(kind_);
    }

    bool is_symmetric() const
    {
        if (const auto* c = std::get_if<ConstantMatrix>(&kind_))
            return (c->value - c->value.transpose()).cwiseAbs().maxCoeff() == 0.0;
        return true;
    }

    std::string name() const
    {
        struct {
            std::string operator()(const ConstantScalar&) const { return "constant"; }
            std::string operator()(const ConstantMatrix&) const { return "matrix"; }
            std::string operator()(const PaperPeriodic&) const { return "paper-periodic"; }
            std::string operator()(const Layered&) const { return "layered"; }
        } namer;
        return std::visit(namer, kind_);
    }

private:
    CoefficientField(Kind kind, Bounds bounds) : kind_(kind), bounds_(bounds) {}

    static Tensor eval(const ConstantScalar& k, const Point&) { return k.value * Tensor::Identity(); }
    static Tensor eval(const ConstantMatrix& k, const Point&) { return k.value; }

    static Tensor eval(const PaperPeriodic& k, const Point& x)
    {
        const double c = std::cos(std::numbers::pi * x.x() / k.epsilon);
        const double s = std::sin(std::numbers::pi * x.y() / k.epsilon);
        return (1.0 + k.amplitude * c * c * s * s) * Tensor::Identity();
    }

    static Tensor eval(const Layered& k, const Point& x)
    {
        const double t = x.x() / k.epsilon;
        const double frac = t - std::floor(t);
        return (frac < 0.5 ? k.a_minus : k.a_plus) * Tensor::Identity();
    }

    Kind kind_;
    Bounds bounds_;
};

static_assert(TensorField<CoefficientField>);

/// Slowly varying right-hand side f.
class SourceField {
public:
    struct Constant {
        double value;
    };
    /// sin(x1) cos(x2)
    struct PaperSource {};
    /// 2 k^2 pi^2 sin(k pi x1) sin(k pi x2); the exact solution for A = Id is
    /// sin(k pi x1) sin(k pi x2).
    struct Manufactured {
        int k;
    };
    using Kind = std::variant<Constant, PaperSource, Manufactured>;

    static SourceField constant(double c) { return SourceField(Constant{c}); }
    static SourceField paper() { return SourceField(PaperSource{}); }
    static SourceField manufactured(int k)
    {
        if (k < 1)
            throw InvalidArgument("manufactured source needs k >= 1");
        return SourceField(Manufactured{k});
    }

    double operator()(const Point& x) const
    {
        using std::numbers::pi;
        struct {
            const Point& x;
            double operator()(const Constant& c) const { return c.value; }
            double operator()(const PaperSource&) const { return std::sin(x.x()) * std::cos(x.y()); }
            double operator()(const Manufactured& m) const
            {
                return 2.0 * m.k * m.k * pi * pi * std::sin(m.k * pi * x.x()) * std::sin(m.k * pi * x.y());
            }
        } eval{x};
        return std::visit(eval, kind_);
    }

    bool is_zero() const
    {
        const auto* c = std::get_if<Constant>(&kind_);
        return c && c->value == 0.0;
    }

    const Kind& kind() const noexcept { return kind_; }

private:
    explicit SourceField(Kind kind) : kind_(kind) {}
    Kind kind_;
};

static_assert(ScalarField<SourceField>);

} // namespace msfem
