#include "tape.hpp"

#include <cmath>

namespace sigent {

namespace {

Matrix softplus_mat(const Matrix& x) {
    // log(1 + e^x), computed as max(x, 0) + log1p(e^{-|x|}) to stay finite.
    return x.unaryExpr([](double v) {
        double a = std::abs(v);
        return std::max(v, 0.0) + std::log1p(std::exp(-a));
    });
}

Matrix sigmoid_mat(const Matrix& x) {
    return x.unaryExpr([](double v) {
        if (v >= 0.0) {
            double e = std::exp(-v);
            return 1.0 / (1.0 + e);
        }
        double e = std::exp(v);
        return e / (1.0 + e);
    });
}

}  // namespace

int Tape::check(Value v) const {
    require(v.id >= 0 && v.id < static_cast<int>(nodes_.size()), ErrorKind::Structural,
            "tape: value handle does not belong to this tape");
    return v.id;
}

Value Tape::push(Op op, Matrix val, int a, int b, double x0, double x1) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.x0 = x0;
    n.x1 = x1;
    if (op == Op::Leaf) {
        n.needs_grad = true;
    } else if (op == Op::Constant || op == Op::StopGrad) {
        n.needs_grad = false;
    } else {
        n.needs_grad = (a >= 0 && nodes_[a].needs_grad) || (b >= 0 && nodes_[b].needs_grad);
    }
    nodes_.push_back(n);
    vals_.push_back(std::move(val));
    return Value{static_cast<int>(nodes_.size()) - 1};
}

Value Tape::constant(Matrix m) { return push(Op::Constant, std::move(m)); }
Value Tape::leaf(Matrix m) { return push(Op::Leaf, std::move(m)); }

Value Tape::matmul(Value a, Value b) {
    int ia = check(a), ib = check(b);
    require(vals_[ia].cols() == vals_[ib].rows(), ErrorKind::Structural, "tape: matmul dimension mismatch");
    return push(Op::MatMul, vals_[ia] * vals_[ib], ia, ib);
}

Value Tape::matmul_nt(Value a, Value b) {
    int ia = check(a), ib = check(b);
    require(vals_[ia].cols() == vals_[ib].cols(), ErrorKind::Structural, "tape: matmul_nt dimension mismatch");
    return push(Op::MatMulNT, vals_[ia] * vals_[ib].transpose(), ia, ib);
}

#define SIGENT_SAME_SHAPE(ia, ib, what)                                                        \
    require(vals_[ia].rows() == vals_[ib].rows() && vals_[ia].cols() == vals_[ib].cols(),      \
            ErrorKind::Structural, "tape: " what " shape mismatch")

Value Tape::add(Value a, Value b) {
    int ia = check(a), ib = check(b);
    SIGENT_SAME_SHAPE(ia, ib, "add");
    return push(Op::Add, vals_[ia] + vals_[ib], ia, ib);
}

Value Tape::sub(Value a, Value b) {
    int ia = check(a), ib = check(b);
    SIGENT_SAME_SHAPE(ia, ib, "sub");
    return push(Op::Sub, vals_[ia] - vals_[ib], ia, ib);
}

Value Tape::mul(Value a, Value b) {
    int ia = check(a), ib = check(b);
    SIGENT_SAME_SHAPE(ia, ib, "mul");
    return push(Op::Mul, vals_[ia].cwiseProduct(vals_[ib]), ia, ib);
}

Value Tape::min(Value a, Value b) {
    int ia = check(a), ib = check(b);
    SIGENT_SAME_SHAPE(ia, ib, "min");
    return push(Op::Min, vals_[ia].cwiseMin(vals_[ib]), ia, ib);
}

Value Tape::max(Value a, Value b) {
    int ia = check(a), ib = check(b);
    SIGENT_SAME_SHAPE(ia, ib, "max");
    return push(Op::Max, vals_[ia].cwiseMax(vals_[ib]), ia, ib);
}

Value Tape::add_rowvec(Value a, Value row) {
    int ia = check(a), ib = check(row);
    require(vals_[ib].rows() == 1 && vals_[ib].cols() == vals_[ia].cols(), ErrorKind::Structural,
            "tape: add_rowvec expects a 1 x cols(a) row vector");
    Matrix out = vals_[ia];
    out.rowwise() += vals_[ib].row(0);
    return push(Op::AddRowVec, std::move(out), ia, ib);
}

Value Tape::sub_colvec(Value a, Value col) {
    int ia = check(a), ib = check(col);
    require(vals_[ib].cols() == 1 && vals_[ib].rows() == vals_[ia].rows(), ErrorKind::Structural,
            "tape: sub_colvec expects a rows(a) x 1 column vector");
    Matrix out = vals_[ia];
    out.colwise() -= vals_[ib].col(0);
    return push(Op::SubColVec, std::move(out), ia, ib);
}

Value Tape::scale(Value a, double c) {
    int ia = check(a);
    return push(Op::Scale, vals_[ia] * c, ia, -1, c);
}

Value Tape::add_scalar(Value a, double c) {
    int ia = check(a);
    return push(Op::AddScalar, vals_[ia].array() + c, ia, -1, c);
}

Value Tape::neg(Value a) {
    int ia = check(a);
    return push(Op::Neg, -vals_[ia], ia);
}

Value Tape::relu(Value a) {
    int ia = check(a);
    return push(Op::Relu, vals_[ia].cwiseMax(0.0), ia);
}

Value Tape::tanh(Value a) {
    int ia = check(a);
    return push(Op::Tanh, vals_[ia].array().tanh(), ia);
}

Value Tape::sigmoid(Value a) {
    int ia = check(a);
    return push(Op::Sigmoid, sigmoid_mat(vals_[ia]), ia);
}

Value Tape::exp(Value a) {
    int ia = check(a);
    return push(Op::Exp, vals_[ia].array().exp(), ia);
}

Value Tape::log(Value a) {
    int ia = check(a);
    return push(Op::Log, vals_[ia].array().log(), ia);
}

Value Tape::softplus(Value a) {
    int ia = check(a);
    return push(Op::Softplus, softplus_mat(vals_[ia]), ia);
}

Value Tape::clamp(Value a, double lo, double hi) {
    int ia = check(a);
    return push(Op::Clamp, vals_[ia].cwiseMax(lo).cwiseMin(hi), ia, -1, lo, hi);
}

Value Tape::stop_gradient(Value a) {
    int ia = check(a);
    return push(Op::StopGrad, vals_[ia], ia);
}

Value Tape::row_sum(Value a) {
    int ia = check(a);
    return push(Op::RowSum, vals_[ia].rowwise().sum(), ia);
}

Value Tape::row_max(Value a) {
    int ia = check(a);
    return push(Op::RowMax, vals_[ia].rowwise().maxCoeff(), ia);
}

Value Tape::sum_all(Value a) {
    int ia = check(a);
    Matrix out(1, 1);
    out(0, 0) = vals_[ia].sum();
    return push(Op::SumAll, std::move(out), ia);
}

Value Tape::mean_all(Value a) {
    int ia = check(a);
    Matrix out(1, 1);
    out(0, 0) = vals_[ia].mean();
    return push(Op::MeanAll, std::move(out), ia);
}

Value Tape::concat_cols(Value a, Value b) {
    int ia = check(a), ib = check(b);
    require(vals_[ia].rows() == vals_[ib].rows(), ErrorKind::Structural, "tape: concat_cols row mismatch");
    Matrix out(vals_[ia].rows(), vals_[ia].cols() + vals_[ib].cols());
    out.leftCols(vals_[ia].cols()) = vals_[ia];
    out.rightCols(vals_[ib].cols()) = vals_[ib];
    return push(Op::ConcatCols, std::move(out), ia, ib);
}

Value Tape::slice_cols(Value a, int first, int count) {
    int ia = check(a);
    require(first >= 0 && count >= 0 && first + count <= vals_[ia].cols(), ErrorKind::Structural,
            "tape: slice_cols out of range");
    return push(Op::SliceCols, vals_[ia].middleCols(first, count), ia, -1, first, count);
}

Value Tape::cols_from_row_blocks(Value a, int k) {
    int ia = check(a);
    require(vals_[ia].cols() == 1 && k >= 1 && vals_[ia].rows() % k == 0, ErrorKind::Structural,
            "tape: cols_from_row_blocks expects a (k*m x 1) input");
    Eigen::Index m = vals_[ia].rows() / k;
    Matrix out(m, k);
    for (int j = 0; j < k; ++j) out.col(j) = vals_[ia].col(0).segment(j * m, m);
    return push(Op::ColsFromRowBlocks, std::move(out), ia, -1, static_cast<double>(k));
}

Value Tape::row_log_sum_exp(Value a) {
    Value m = stop_gradient(row_max(a));
    return add(log(row_sum(exp(sub_colvec(a, m)))), m);
}

Matrix& Tape::grad_buf(int id) {
    if (grads_[id].size() == 0) grads_[id] = Matrix::Zero(vals_[id].rows(), vals_[id].cols());
    return grads_[id];
}

void Tape::backward(Value loss) {
    int il = check(loss);
    require(vals_[il].rows() == 1 && vals_[il].cols() == 1, ErrorKind::Structural,
            "tape: backward requires a scalar (1x1) loss node");
    require(!backward_done_, ErrorKind::Structural, "tape: backward may only run once per tape");
    backward_done_ = true;

    grads_.assign(nodes_.size(), Matrix());
    grad_buf(il)(0, 0) = 1.0;

    for (int i = il; i >= 0; --i) {
        const Node& n = nodes_[i];
        if (!n.needs_grad || grads_[i].size() == 0) continue;
        const Matrix& g = grads_[i];
        auto wants = [&](int id) { return id >= 0 && nodes_[id].needs_grad; };
        switch (n.op) {
            case Op::Leaf:
            case Op::Constant:
            case Op::StopGrad:
                break;
            case Op::MatMul:
                if (wants(n.a)) grad_buf(n.a).noalias() += g * vals_[n.b].transpose();
                if (wants(n.b)) grad_buf(n.b).noalias() += vals_[n.a].transpose() * g;
                break;
            case Op::MatMulNT:
                if (wants(n.a)) grad_buf(n.a).noalias() += g * vals_[n.b];
                if (wants(n.b)) grad_buf(n.b).noalias() += g.transpose() * vals_[n.a];
                break;
            case Op::Add:
                if (wants(n.a)) grad_buf(n.a) += g;
                if (wants(n.b)) grad_buf(n.b) += g;
                break;
            case Op::Sub:
                if (wants(n.a)) grad_buf(n.a) += g;
                if (wants(n.b)) grad_buf(n.b) -= g;
                break;
            case Op::Mul:
                if (wants(n.a)) grad_buf(n.a) += g.cwiseProduct(vals_[n.b]);
                if (wants(n.b)) grad_buf(n.b) += g.cwiseProduct(vals_[n.a]);
                break;
            case Op::Min:
                if (wants(n.a)) grad_buf(n.a) += g.cwiseProduct((vals_[n.a].array() <= vals_[n.b].array()).cast<double>().matrix());
                if (wants(n.b)) grad_buf(n.b) += g.cwiseProduct((vals_[n.a].array() > vals_[n.b].array()).cast<double>().matrix());
                break;
            case Op::Max:
                if (wants(n.a)) grad_buf(n.a) += g.cwiseProduct((vals_[n.a].array() >= vals_[n.b].array()).cast<double>().matrix());
                if (wants(n.b)) grad_buf(n.b) += g.cwiseProduct((vals_[n.a].array() < vals_[n.b].array()).cast<double>().matrix());
                break;
            case Op::AddRowVec:
                if (wants(n.a)) grad_buf(n.a) += g;
                if (wants(n.b)) grad_buf(n.b) += g.colwise().sum();
                break;
            case Op::SubColVec:
                if (wants(n.a)) grad_buf(n.a) += g;
                if (wants(n.b)) grad_buf(n.b) -= g.rowwise().sum();
                break;
            case Op::Scale:
                if (wants(n.a)) grad_buf(n.a) += g * n.x0;
                break;
            case Op::AddScalar:
                if (wants(n.a)) grad_buf(n.a) += g;
                break;
            case Op::Neg:
                if (wants(n.a)) grad_buf(n.a) -= g;
                break;
            case Op::Relu:
                if (wants(n.a)) grad_buf(n.a) += g.cwiseProduct((vals_[n.a].array() > 0.0).cast<double>().matrix());
                break;
            case Op::Tanh:
                if (wants(n.a)) grad_buf(n.a) += g.cwiseProduct((1.0 - vals_[i].array().square()).matrix());
                break;
            case Op::Sigmoid:
                if (wants(n.a)) grad_buf(n.a) += g.cwiseProduct((vals_[i].array() * (1.0 - vals_[i].array())).matrix());
                break;
            case Op::Exp:
                if (wants(n.a)) grad_buf(n.a) += g.cwiseProduct(vals_[i]);
                break;
            case Op::Log:
                if (wants(n.a)) grad_buf(n.a) += g.cwiseQuotient(vals_[n.a]);
                break;
            case Op::Softplus:
                if (wants(n.a)) grad_buf(n.a) += g.cwiseProduct(sigmoid_mat(vals_[n.a]));
                break;
            case Op::Clamp:
                if (wants(n.a))
                    grad_buf(n.a) += g.cwiseProduct(
                        ((vals_[n.a].array() >= n.x0) && (vals_[n.a].array() <= n.x1)).cast<double>().matrix());
                break;
            case Op::RowSum:
                if (wants(n.a)) grad_buf(n.a).colwise() += g.col(0);
                break;
            case Op::RowMax:
                if (wants(n.a)) {
                    Matrix& ga = grad_buf(n.a);
                    for (Eigen::Index r = 0; r < vals_[n.a].rows(); ++r) {
                        Eigen::Index c;
                        vals_[n.a].row(r).maxCoeff(&c);
                        ga(r, c) += g(r, 0);
                    }
                }
                break;
            case Op::SumAll:
                if (wants(n.a)) grad_buf(n.a).array() += g(0, 0);
                break;
            case Op::MeanAll:
                if (wants(n.a)) grad_buf(n.a).array() += g(0, 0) / static_cast<double>(vals_[n.a].size());
                break;
            case Op::ConcatCols:
                if (wants(n.a)) grad_buf(n.a) += g.leftCols(vals_[n.a].cols());
                if (wants(n.b)) grad_buf(n.b) += g.rightCols(vals_[n.b].cols());
                break;
            case Op::SliceCols:
                if (wants(n.a))
                    grad_buf(n.a).middleCols(static_cast<int>(n.x0), static_cast<int>(n.x1)) += g;
                break;
            case Op::ColsFromRowBlocks:
                if (wants(n.a)) {
                    int k = static_cast<int>(n.x0);
                    Eigen::Index m = vals_[n.a].rows() / k;
                    Matrix& ga = grad_buf(n.a);
                    for (int j = 0; j < k; ++j) ga.col(0).segment(j * m, m) += g.col(j);
                }
                break;
        }
    }

    // Leaves the loss never touched still report well-formed zero gradients.
    for (size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].op == Op::Leaf && grads_[i].size() == 0)
            grads_[i] = Matrix::Zero(vals_[i].rows(), vals_[i].cols());
}

const Matrix& Tape::grad(Value v) const {
    int i = check(v);
    require(backward_done_, ErrorKind::Structural, "tape: grad queried before backward");
    require(grads_[i].size() != 0, ErrorKind::Structural, "tape: node has no gradient buffer");
    return grads_[i];
}

double Tape::scalar(Value v) const {
    int i = check(v);
    require(vals_[i].rows() == 1 && vals_[i].cols() == 1, ErrorKind::Structural, "tape: node is not scalar");
    return vals_[i](0, 0);
}

}  // namespace sigent
