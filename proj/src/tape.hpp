#pragma once

#include <Eigen/Dense>
#include <vector>

#include "errors.hpp"

namespace sigent {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Handle into a Tape. Cheap to copy; only valid for the tape that created it.
struct Value {
    int id = -1;
};

// Reverse-mode differentiation tape over dense matrices. Losses are built as
// expression graphs whose nodes hold whole batches, so the heavy lifting stays
// inside Eigen products. A tape is single-shot: build the graph, call
// backward() once on a scalar node, then read gradients of the leaves.
class Tape {
public:
    Value constant(Matrix m);
    Value leaf(Matrix m);

    // c = a * b and c = a * b^T
    Value matmul(Value a, Value b);
    Value matmul_nt(Value a, Value b);

    // elementwise, same shape
    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value min(Value a, Value b);
    Value max(Value a, Value b);

    // broadcasts
    Value add_rowvec(Value a, Value row);  // (m x n) + (1 x n)
    Value sub_colvec(Value a, Value col);  // (m x n) - (m x 1)

    // scalar right-hand sides
    Value scale(Value a, double c);
    Value add_scalar(Value a, double c);

    // unary
    Value neg(Value a);
    Value relu(Value a);
    Value tanh(Value a);
    Value sigmoid(Value a);
    Value exp(Value a);
    Value log(Value a);
    Value softplus(Value a);
    Value clamp(Value a, double lo, double hi);
    Value stop_gradient(Value a);

    // reductions
    Value row_sum(Value a);   // (m x n) -> (m x 1)
    Value row_max(Value a);   // (m x n) -> (m x 1)
    Value sum_all(Value a);   // -> (1 x 1)
    Value mean_all(Value a);  // -> (1 x 1)

    // layout
    Value concat_cols(Value a, Value b);
    Value slice_cols(Value a, int first, int count);
    // Input (k*m x 1) -> output (m x k), column j taken from rows [j*m, (j+1)*m).
    Value cols_from_row_blocks(Value a, int k);

    // Numerically stable log-sum-exp over each row, built from primitive ops.
    Value row_log_sum_exp(Value a);

    // Backpropagates from a 1x1 loss node. Throws a structural error when the
    // node is not scalar. Leaves untouched by the loss end with zero gradients.
    void backward(Value loss);

    const Matrix& value(Value v) const { return vals_[check(v)]; }
    const Matrix& grad(Value v) const;
    double scalar(Value v) const;
    int size() const { return static_cast<int>(nodes_.size()); }

private:
    enum class Op {
        Leaf, Constant, MatMul, MatMulNT, Add, Sub, Mul, Min, Max,
        AddRowVec, SubColVec, Scale, AddScalar, Neg, Relu, Tanh, Sigmoid,
        Exp, Log, Softplus, Clamp, StopGrad, RowSum, RowMax, SumAll, MeanAll,
        ConcatCols, SliceCols, ColsFromRowBlocks,
    };
    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        double x0 = 0.0;
        double x1 = 0.0;
        bool needs_grad = false;
    };

    int check(Value v) const;
    Value push(Op op, Matrix val, int a = -1, int b = -1, double x0 = 0.0, double x1 = 0.0);
    Matrix& grad_buf(int id);

    std::vector<Node> nodes_;
    std::vector<Matrix> vals_;
    std::vector<Matrix> grads_;
    bool backward_done_ = false;
};

}  // namespace sigent
