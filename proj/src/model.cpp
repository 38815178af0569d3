#include "emax/model.hpp"

#include <cmath>
#include <string>

namespace emax {

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) throw DomainError(std::string(name) + " is not finite");
}

}  // namespace

bool is_admissible(const EmaxParams& p, double a) {
    return p.theta1 > 0.0 && p.theta2 > -a;
}

bool is_admissible(const TildeParams& t) {
    return t.t1 > 0.0 && t.t2 > 0.0;
}

EmaxParams make_params(double theta0, double theta1, double theta2, double a,
                       Admissibility mode) {
    require_finite(theta0, "theta0");
    require_finite(theta1, "theta1");
    require_finite(theta2, "theta2");
    EmaxParams p{theta0, theta1, theta2};
    if (mode == Admissibility::Strict && !is_admissible(p, a)) {
        throw DomainError("inadmissible parameters: need theta1 > 0 and theta2 > -a");
    }
    return p;
}

DoseDomain::DoseDomain(double a_, double b_) : a(a_), b(b_) {
    require_finite(a, "a");
    require_finite(b, "b");
    if (a < 0.0) throw ValidationError("dose domain: a must be >= 0");
    if (!(a < b)) throw ValidationError("dose domain: need a < b");
}

ThreePointDesign::ThreePointDesign(DoseDomain domain_, double x2_, std::array<double, 3> weights_)
    : domain(domain_), x2(x2_), weights(weights_) {
    require_finite(x2, "x2");
    if (!(domain.a < x2 && x2 < domain.b)) {
        throw ValidationError("design: need a < x2 < b");
    }
    double sum = 0.0;
    for (double w : weights) {
        require_finite(w, "weight");
        if (w < 0.0) throw ValidationError("design: weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw ValidationError("design: weights must sum to 1");
    }
}

NoiseModel::NoiseModel(double sigma_) : sigma(sigma_) {
    require_finite(sigma, "sigma");
    if (!(sigma > 0.0)) throw ValidationError("noise: sigma must be > 0");
}

double eta(double x, const EmaxParams& p) {
    const double denom = x + p.theta2;
    if (denom == 0.0) {
        throw SingularityError("eta: evaluation at the vertical asymptote x = -theta2");
    }
    return p.theta0 + p.theta1 * x / denom;
}

Eigen::Vector3d eta_gradient(double x, const EmaxParams& p) {
    const double denom = x + p.theta2;
    if (denom == 0.0) {
        throw SingularityError("eta_gradient: evaluation at the vertical asymptote x = -theta2");
    }
    const double g = x / denom;
    return {1.0, g, -p.theta1 * x / (denom * denom)};
}

TildeParams to_tilde(const EmaxParams& p, double a) {
    const double denom = p.theta2 + a;
    if (denom == 0.0) {
        throw SingularityError("to_tilde: theta2 + a = 0");
    }
    const double shift = a * p.theta1 / denom;
    return {p.theta0 + shift, p.theta1 - shift, p.theta2 + a};
}

EmaxParams from_tilde(const TildeParams& t, double a) {
    if (t.t2 == 0.0) {
        throw SingularityError("from_tilde: t2 = 0");
    }
    if (t.t2 - a == 0.0) {
        throw SingularityError("from_tilde: t2 = a makes the natural parameters singular");
    }
    const double theta1 = t.t1 * t.t2 / (t.t2 - a);
    const double theta0 = t.t0 - a * t.t1 / (t.t2 - a);
    return {theta0, theta1, t.t2 - a};
}

double eta_tilde(double x, const TildeParams& t, double a) {
    const double xs = x - a;
    const double denom = xs + t.t2;
    if (denom == 0.0) {
        throw SingularityError("eta_tilde: evaluation at the vertical asymptote");
    }
    return t.t0 + t.t1 * xs / denom;
}

double d_optimal_x2(const DoseDomain& domain, double theta2) {
    if (!(theta2 > -domain.a)) {
        throw DomainError("d_optimal_x2: need theta2 > -a");
    }
    const double pa = domain.a + theta2;
    const double pb = domain.b + theta2;
    return (domain.b * pa + domain.a * pb) / (pa + pb);
}

ThreePointDesign d_optimal_design(const DoseDomain& domain, double theta2) {
    const double third = 1.0 / 3.0;
    return ThreePointDesign(domain, d_optimal_x2(domain, theta2), {third, third, third});
}

Eigen::Matrix3d fisher_information(const ThreePointDesign& design, const EmaxParams& p,
                                   const NoiseModel& noise, double n) {
    // Accumulate the upper triangle and mirror, so the result is symmetric
    // bit for bit.
    Eigen::Matrix3d info = Eigen::Matrix3d::Zero();
    const auto doses = design.doses();
    for (int i = 0; i < 3; ++i) {
        const Eigen::Vector3d g = eta_gradient(doses[i], p);
        const double w = design.weights[static_cast<std::size_t>(i)];
        for (int r = 0; r < 3; ++r) {
            for (int c = r; c < 3; ++c) {
                info(r, c) += w * g[r] * g[c];
            }
        }
    }
    info *= n / (noise.sigma * noise.sigma);
    info(1, 0) = info(0, 1);
    info(2, 0) = info(0, 2);
    info(2, 1) = info(1, 2);
    return info;
}

}  // namespace emax
