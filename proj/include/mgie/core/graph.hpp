#pragma once

#include <Eigen/Dense>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mgie/core/param.hpp"

namespace mgie {

using Mat = Eigen::MatrixXd;
using Var = int;

// Reverse-mode autodiff tape over dense matrices. A fresh Graph is built per
// forward pass; parameters are external (see Param) and receive gradient
// through their leaf nodes after backward().
class Graph {
public:
    struct Node {
        Mat val;
        Mat grad;  // allocated lazily during backward
        std::function<void(Graph&)> back;  // may be empty for leaves/constants
    };

    std::vector<Node> nodes;

    const Mat& val(Var v) const { return nodes[v].val; }
    Mat& grad(Var v) { return nodes[v].grad; }
    Eigen::Index rows(Var v) const { return nodes[v].val.rows(); }
    Eigen::Index cols(Var v) const { return nodes[v].val.cols(); }

    Var constant(Mat m) {
        nodes.push_back({std::move(m), {}, {}});
        return static_cast<Var>(nodes.size() - 1);
    }

    // Leaf backed by a Param; one node per param per graph.
    Var param(Param& p) {
        auto it = param_nodes_.find(&p);
        if (it != param_nodes_.end()) return it->second;
        Var v = constant(p.value);
        param_nodes_.emplace(&p, v);
        param_list_.push_back({&p, v});
        return v;
    }

    // Accumulated gradient for a param after backward(); zero if unused.
    Mat param_grad(const Param& p) const {
        auto it = param_nodes_.find(const_cast<Param*>(&p));
        if (it == param_nodes_.end() || nodes[it->second].grad.size() == 0)
            return Mat::Zero(p.value.rows(), p.value.cols());
        return nodes[it->second].grad;
    }

    const std::vector<std::pair<Param*, Var>>& params_used() const { return param_list_; }

    // ---- elementwise / broadcast ----

    Var add(Var a, Var b) {
        check_same(a, b);
        Var out = constant(val(a) + val(b));
        nodes[out].back = [a, b, out](Graph& g) {
            g.acc(a, g.grad(out));
            g.acc(b, g.grad(out));
        };
        return out;
    }

    Var sub(Var a, Var b) {
        check_same(a, b);
        Var out = constant(val(a) - val(b));
        nodes[out].back = [a, b, out](Graph& g) {
            g.acc(a, g.grad(out));
            g.acc(b, -g.grad(out));
        };
        return out;
    }

    Var mul(Var a, Var b) {  // elementwise
        check_same(a, b);
        Var out = constant(val(a).cwiseProduct(val(b)));
        nodes[out].back = [a, b, out](Graph& g) {
            g.acc(a, g.grad(out).cwiseProduct(g.val(b)));
            g.acc(b, g.grad(out).cwiseProduct(g.val(a)));
        };
        return out;
    }

    Var scale(Var a, double s) {
        Var out = constant(val(a) * s);
        nodes[out].back = [a, s, out](Graph& g) { g.acc(a, g.grad(out) * s); };
        return out;
    }

    // Broadcast-add a 1xC row vector to every row of a.
    Var add_rowvec(Var a, Var v) {
        assert(cols(a) == cols(v) && rows(v) == 1);
        Var out = constant(val(a).rowwise() + val(v).row(0));
        nodes[out].back = [a, v, out](Graph& g) {
            g.acc(a, g.grad(out));
            g.acc(v, g.grad(out).colwise().sum());
        };
        return out;
    }

    // ---- matmul ----

    Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false) {
        const Mat& A = val(a);
        const Mat& B = val(b);
        Mat r;
        if (!trans_a && !trans_b) r = A * B;
        else if (trans_a && !trans_b) r = A.transpose() * B;
        else if (!trans_a && trans_b) r = A * B.transpose();
        else r = A.transpose() * B.transpose();
        Var out = constant(std::move(r));
        nodes[out].back = [a, b, trans_a, trans_b, out](Graph& g) {
            const Mat& G = g.grad(out);
            const Mat& A = g.val(a);
            const Mat& B = g.val(b);
            if (!trans_a && !trans_b) {
                g.acc(a, G * B.transpose());
                g.acc(b, A.transpose() * G);
            } else if (trans_a && !trans_b) {
                g.acc(a, B * G.transpose());
                g.acc(b, A * G);
            } else if (!trans_a && trans_b) {
                g.acc(a, G * B);
                g.acc(b, G.transpose() * A);
            } else {
                g.acc(a, (G * B).transpose());
                g.acc(b, (A * G).transpose());
            }
        };
        return out;
    }

    // ---- shape ops ----

    Var slice_rows(Var a, int r0, int n) {
        Var out = constant(val(a).middleRows(r0, n));
        nodes[out].back = [a, r0, n, out](Graph& g) {
            Mat d = Mat::Zero(g.rows(a), g.cols(a));
            d.middleRows(r0, n) = g.grad(out);
            g.acc(a, d);
        };
        return out;
    }

    Var slice_cols(Var a, int c0, int n) {
        Var out = constant(val(a).middleCols(c0, n));
        nodes[out].back = [a, c0, n, out](Graph& g) {
            Mat d = Mat::Zero(g.rows(a), g.cols(a));
            d.middleCols(c0, n) = g.grad(out);
            g.acc(a, d);
        };
        return out;
    }

    Var concat_rows(Var a, Var b) {
        assert(cols(a) == cols(b));
        Mat r(rows(a) + rows(b), cols(a));
        r << val(a), val(b);
        Var out = constant(std::move(r));
        nodes[out].back = [a, b, out](Graph& g) {
            int ra = static_cast<int>(g.rows(a));
            g.acc(a, g.grad(out).topRows(ra));
            g.acc(b, g.grad(out).bottomRows(g.rows(b)));
        };
        return out;
    }

    Var concat_cols(Var a, Var b) {
        assert(rows(a) == rows(b));
        Mat r(rows(a), cols(a) + cols(b));
        r << val(a), val(b);
        Var out = constant(std::move(r));
        nodes[out].back = [a, b, out](Graph& g) {
            int ca = static_cast<int>(g.cols(a));
            g.acc(a, g.grad(out).leftCols(ca));
            g.acc(b, g.grad(out).rightCols(g.cols(b)));
        };
        return out;
    }

    // Gather rows by index (embedding lookup, upsampling). idx[i] selects the
    // source row of output row i.
    Var gather_rows(Var a, std::vector<int> idx) {
        Mat r(static_cast<Eigen::Index>(idx.size()), cols(a));
        for (size_t i = 0; i < idx.size(); ++i) r.row(i) = val(a).row(idx[i]);
        Var out = constant(std::move(r));
        nodes[out].back = [a, idx = std::move(idx), out](Graph& g) {
            Mat d = Mat::Zero(g.rows(a), g.cols(a));
            for (size_t i = 0; i < idx.size(); ++i) d.row(idx[i]) += g.grad(out).row(i);
            g.acc(a, d);
        };
        return out;
    }

    // im2col for 3x3-style convolutions. Input a is (H*W, C) row-major over
    // pixels; output is (Ho*Wo, k*k*C) with zero padding. Pair with matmul
    // against a (k*k*C, Cout) weight to get a convolution.
    Var im2col(Var a, int H, int W, int k, int stride, int pad) {
        int C = static_cast<int>(cols(a));
        int Ho = (H + 2 * pad - k) / stride + 1;
        int Wo = (W + 2 * pad - k) / stride + 1;
        std::vector<int> src(static_cast<size_t>(Ho) * Wo * k * k, -1);
        for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox)
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        int iy = oy * stride - pad + ky;
                        int ix = ox * stride - pad + kx;
                        size_t pos = ((static_cast<size_t>(oy) * Wo + ox) * k + ky) * k + kx;
                        if (iy >= 0 && iy < H && ix >= 0 && ix < W) src[pos] = iy * W + ix;
                    }
        Mat r = Mat::Zero(static_cast<Eigen::Index>(Ho) * Wo, static_cast<Eigen::Index>(k) * k * C);
        for (int p = 0; p < Ho * Wo; ++p)
            for (int q = 0; q < k * k; ++q) {
                int s = src[static_cast<size_t>(p) * k * k + q];
                if (s >= 0) r.block(p, q * C, 1, C) = val(a).row(s);
            }
        Var out = constant(std::move(r));
        nodes[out].back = [a, src = std::move(src), C, k, out](Graph& g) {
            Mat d = Mat::Zero(g.rows(a), g.cols(a));
            int npix = static_cast<int>(g.rows(out));
            for (int p = 0; p < npix; ++p)
                for (int q = 0; q < k * k; ++q) {
                    int s = src[static_cast<size_t>(p) * k * k + q];
                    if (s >= 0) d.row(s) += g.grad(out).block(p, q * C, 1, C);
                }
            g.acc(a, d);
        };
        return out;
    }

    // ---- nonlinearities ----

    Var relu(Var a) {
        Var out = constant(val(a).cwiseMax(0.0));
        nodes[out].back = [a, out](Graph& g) {
            g.acc(a, g.grad(out).cwiseProduct(
                         (g.val(a).array() > 0.0).cast<double>().matrix()));
        };
        return out;
    }

    Var silu(Var a) {
        Mat sig = (1.0 / (1.0 + (-val(a).array()).exp())).matrix();
        Var out = constant(val(a).cwiseProduct(sig));
        nodes[out].back = [a, sig = std::move(sig), out](Graph& g) {
            Mat d = sig.array() * (1.0 + g.val(a).array() * (1.0 - sig.array()));
            g.acc(a, g.grad(out).cwiseProduct(d));
        };
        return out;
    }

    Var gelu(Var a) {  // tanh approximation
        const double c = std::sqrt(2.0 / M_PI);
        Eigen::ArrayXXd x = val(a).array();
        Eigen::ArrayXXd inner = c * (x + 0.044715 * x.cube());
        Eigen::ArrayXXd th = inner.tanh();
        Var out = constant((0.5 * x * (1.0 + th)).matrix());
        nodes[out].back = [a, th = std::move(th), out, c](Graph& g) {
            Eigen::ArrayXXd x = g.val(a).array();
            Eigen::ArrayXXd sech2 = 1.0 - th * th;
            Eigen::ArrayXXd d = 0.5 * (1.0 + th) +
                                0.5 * x * sech2 * c * (1.0 + 3.0 * 0.044715 * x * x);
            g.acc(a, (g.grad(out).array() * d).matrix());
        };
        return out;
    }

    Var exp_op(Var a) {
        Mat e = val(a).array().exp().matrix();
        Var out = constant(e);
        nodes[out].back = [a, out](Graph& g) {
            g.acc(a, g.grad(out).cwiseProduct(g.val(out)));
        };
        return out;
    }

    Var tanh_op(Var a) {
        Mat t = val(a).array().tanh().matrix();
        Var out = constant(t);
        nodes[out].back = [a, t = std::move(t), out](Graph& g) {
            g.acc(a, (g.grad(out).array() * (1.0 - t.array().square())).matrix());
        };
        return out;
    }

    // ---- row-wise softmax / normalization ----

    Var softmax_rows(Var a) {
        Mat r = val(a);
        for (Eigen::Index i = 0; i < r.rows(); ++i) {
            Eigen::ArrayXd row = r.row(i).array();
            row -= row.maxCoeff();
            row = row.exp();
            r.row(i) = (row / row.sum()).matrix();
        }
        Var out = constant(std::move(r));
        nodes[out].back = [a, out](Graph& g) {
            const Mat& s = g.val(out);
            const Mat& G = g.grad(out);
            Mat d(s.rows(), s.cols());
            for (Eigen::Index i = 0; i < s.rows(); ++i) {
                double dot = s.row(i).dot(G.row(i));
                d.row(i) = s.row(i).cwiseProduct(G.row(i) - Mat::Constant(1, s.cols(), dot));
            }
            g.acc(a, d);
        };
        return out;
    }

    // Row-wise layer normalization with affine parameters gamma/beta (1xC).
    Var layer_norm(Var a, Var gamma, Var beta, double eps = 1e-5) {
        const Mat& x = val(a);
        Eigen::Index R = x.rows(), C = x.cols();
        Eigen::VectorXd mean = x.rowwise().mean();
        Mat centered = x.colwise() - mean;
        Eigen::VectorXd var = centered.array().square().rowwise().mean();
        Eigen::VectorXd inv_std = (var.array() + eps).rsqrt();
        Mat xhat = centered.array().colwise() * inv_std.array();
        Mat r = (xhat.array().rowwise() * val(gamma).row(0).array()).rowwise() +
                val(beta).row(0).array();
        Var out = constant(std::move(r));
        nodes[out].back = [a, gamma, beta, xhat = std::move(xhat),
                           inv_std = std::move(inv_std), R, C, out](Graph& g) {
            const Mat& G = g.grad(out);
            g.acc(beta, G.colwise().sum());
            g.acc(gamma, xhat.cwiseProduct(G).colwise().sum());
            Mat dxhat = G.array().rowwise() * g.val(gamma).row(0).array();
            Mat d(R, C);
            for (Eigen::Index i = 0; i < R; ++i) {
                double m1 = dxhat.row(i).mean();
                double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
                d.row(i) = inv_std(i) *
                           (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2).matrix();
            }
            g.acc(a, d);
        };
        return out;
    }

    // ---- reductions / losses (1x1 outputs) ----

    Var sum(Var a) {
        Var out = constant(Mat::Constant(1, 1, val(a).sum()));
        nodes[out].back = [a, out](Graph& g) {
            g.acc(a, Mat::Constant(g.rows(a), g.cols(a), g.grad(out)(0, 0)));
        };
        return out;
    }

    Var mean_all(Var a) { return scale(sum(a), 1.0 / static_cast<double>(val(a).size())); }

    Var sum_squares(Var a) {
        Var out = constant(Mat::Constant(1, 1, val(a).squaredNorm()));
        nodes[out].back = [a, out](Graph& g) { g.acc(a, 2.0 * g.grad(out)(0, 0) * g.val(a)); };
        return out;
    }

    Var mse(Var a, Var b) {
        check_same(a, b);
        double n = static_cast<double>(val(a).size());
        Var out = constant(Mat::Constant(1, 1, (val(a) - val(b)).squaredNorm() / n));
        nodes[out].back = [a, b, n, out](Graph& g) {
            Mat d = (2.0 / n) * g.grad(out)(0, 0) * (g.val(a) - g.val(b));
            g.acc(a, d);
            g.acc(b, -d);
        };
        return out;
    }

    // Mean token-level cross entropy over rows with mask[i] != 0.
    // logits: (T, V); targets: token ids per row.
    Var cross_entropy(Var logits, const std::vector<int>& targets,
                      const std::vector<uint8_t>& mask) {
        const Mat& L = val(logits);
        assert(static_cast<Eigen::Index>(targets.size()) == L.rows());
        assert(targets.size() == mask.size());
        double count = 0.0, total = 0.0;
        Mat probs(L.rows(), L.cols());
        for (Eigen::Index i = 0; i < L.rows(); ++i) {
            Eigen::ArrayXd row = L.row(i).array();
            double mx = row.maxCoeff();
            Eigen::ArrayXd ex = (row - mx).exp();
            double Z = ex.sum();
            probs.row(i) = (ex / Z).matrix();
            if (mask[i]) {
                total += -(L(i, targets[i]) - mx - std::log(Z));
                count += 1.0;
            }
        }
        if (count == 0.0) throw std::invalid_argument("cross_entropy: empty mask");
        Var out = constant(Mat::Constant(1, 1, total / count));
        nodes[out].back = [logits, targets, mask, probs = std::move(probs), count,
                           out](Graph& g) {
            double s = g.grad(out)(0, 0) / count;
            Mat d = Mat::Zero(probs.rows(), probs.cols());
            for (Eigen::Index i = 0; i < probs.rows(); ++i) {
                if (!mask[i]) continue;
                d.row(i) = s * probs.row(i);
                d(i, targets[i]) -= s;
            }
            g.acc(logits, d);
        };
        return out;
    }

    // ---- backward ----

    void backward(Var loss) {
        assert(val(loss).size() == 1);
        for (auto& n : nodes) n.grad.resize(0, 0);
        nodes[loss].grad = Mat::Constant(1, 1, 1.0);
        for (int i = loss; i >= 0; --i) {
            if (nodes[i].grad.size() == 0 || !nodes[i].back) continue;
            nodes[i].back(*this);
        }
    }

private:
    std::unordered_map<Param*, Var> param_nodes_;
    std::vector<std::pair<Param*, Var>> param_list_;

    void check_same(Var a, Var b) const {
        assert(rows(a) == rows(b) && cols(a) == cols(b));
        (void)a; (void)b;
    }

    void acc(Var v, const Mat& g) {
        if (nodes[v].grad.size() == 0)
            nodes[v].grad = Mat::Zero(nodes[v].val.rows(), nodes[v].val.cols());
        nodes[v].grad += g;
    }
    void acc(Var v, Mat&& g) {
        if (nodes[v].grad.size() == 0) nodes[v].grad = std::move(g);
        else nodes[v].grad += g;
    }
};

}  // namespace mgie
