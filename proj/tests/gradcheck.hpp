#pragma once

#include <cmath>
#include <functional>

#include "mgie/core/graph.hpp"
#include "mgie/core/param.hpp"

namespace mgie::testutil {

// Central-difference gradient check for one parameter of a scalar-valued
// computation. build() must construct the full forward pass on the given
// graph and return the loss Var; it is re-invoked per probe so it has to be
// deterministic. Returns the relative error between the analytic gradient
// and finite differences over every entry of p.
inline double grad_rel_err(const std::function<Var(Graph&)>& build, Param& p,
                           double step = 1e-5) {
    Graph g;
    Var loss = build(g);
    g.backward(loss);
    Eigen::MatrixXd analytic = g.param_grad(p);

    Eigen::MatrixXd numeric(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < p.value.rows(); ++i)
        for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
            double orig = p.value(i, j);
            p.value(i, j) = orig + step;
            Graph gp;
            double fp = gp.val(build(gp))(0, 0);
            p.value(i, j) = orig - step;
            Graph gm;
            double fm = gm.val(build(gm))(0, 0);
            p.value(i, j) = orig;
            numeric(i, j) = (fp - fm) / (2.0 * step);
        }
    double denom = std::max({analytic.norm(), numeric.norm(), 1e-10});
    return (analytic - numeric).norm() / denom;
}

}  // namespace mgie::testutil
