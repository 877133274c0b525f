#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mgie/core/param.hpp"

namespace mgie {

// AdamW with decoupled weight decay and per-parameter learning-rate groups.
// Parameters in the frozen set are never touched.
class AdamW {
public:
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.01;

    void set_lr(Param& p, double lr) { lr_[p.id] = lr; }
    void freeze(Param& p) { frozen_.insert(p.id); }
    bool is_frozen(const Param& p) const { return frozen_.count(p.id) > 0; }
    bool is_trainable(const Param& p) const {
        return !is_frozen(p) && lr_.count(p.id) && lr_.at(p.id) > 0.0;
    }

    // Applies one step given accumulated gradients (param id -> grad).
    void step(ParamStore& store, const std::unordered_map<int, Eigen::MatrixXd>& grads) {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1, t_);
        double bc2 = 1.0 - std::pow(beta2, t_);
        for (auto& pp : store) {
            Param& p = *pp;
            if (!is_trainable(p)) continue;
            auto it = grads.find(p.id);
            if (it == grads.end()) continue;
            const Eigen::MatrixXd& g = it->second;
            auto& st = state_[p.id];
            if (st.m.size() == 0) {
                st.m = Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols());
                st.v = Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols());
            }
            double lr = lr_.at(p.id);
            st.m = beta1 * st.m + (1.0 - beta1) * g;
            st.v = beta2 * st.v + (1.0 - beta2) * g.cwiseProduct(g);
            Eigen::MatrixXd mhat = st.m / bc1;
            Eigen::MatrixXd vhat = st.v / bc2;
            p.value -= lr * weight_decay * p.value;
            p.value.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
        }
    }

    int64_t step_count() const { return t_; }

private:
    struct State {
        Eigen::MatrixXd m, v;
    };
    std::unordered_map<int, State> state_;
    std::unordered_map<int, double> lr_;
    std::unordered_set<int> frozen_;
    int64_t t_ = 0;
};

}  // namespace mgie
