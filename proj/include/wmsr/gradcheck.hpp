#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "wmsr/tensor.hpp"

namespace wmsr {

struct GradCheckResult {
    double max_rel_error = 0;
    std::size_t worst_index = 0;
    double analytic = 0;
    double numeric = 0;
};

/// Compares the tape gradient of scalar f at x with central differences
/// (f(x + eps e_i) - f(x - eps e_i)) / 2 eps, element by element. The
/// relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
///
/// f must be deterministic (reseed any RNG inside it). x is perturbed in
/// place and restored.
inline GradCheckResult grad_check_detailed(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                                           Tensor<double> x, double eps = 1e-5) {
    x.set_requires_grad(true);
    x.zero_grad();
    std::vector<double> analytic;
    {
        Tape<double> tape;
        auto scope = tape.activate();
        Tensor<double> y = f(x);
        tape.backward(y);
        analytic.assign(x.numel(), 0.0);
        if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
    }
    GradCheckResult r;
    auto data = x.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double orig = data[i];
        data[i] = orig + eps;
        const double fp = f(x).item();
        data[i] = orig - eps;
        const double fm = f(x).item();
        data[i] = orig;
        const double numeric = (fp - fm) / (2 * eps);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        const double err = std::abs(analytic[i] - numeric) / denom;
        if (err > r.max_rel_error) r = GradCheckResult{err, i, analytic[i], numeric};
    }
    x.zero_grad();
    return r;
}

/// Returns the max relative error only.
inline double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f, const Tensor<double>& x,
                         double eps = 1e-5) {
    return grad_check_detailed(f, x, eps).max_rel_error;
}

}  // namespace wmsr
