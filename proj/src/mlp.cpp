#include "mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sigent {

Mlp::Mlp(std::vector<int> sizes, Activation act) : layer_sizes(std::move(sizes)), hidden_activation(act) {
    require(layer_sizes.size() >= 2, ErrorKind::Structural, "mlp: need at least input and output widths");
    for (int s : layer_sizes)
        require(s >= 1, ErrorKind::Structural, "mlp: layer widths must be positive");
    for (size_t k = 1; k < layer_sizes.size(); ++k) {
        weights.push_back(Matrix::Zero(layer_sizes[k], layer_sizes[k - 1]));
        biases.push_back(Matrix::Zero(1, layer_sizes[k]));
    }
}

bool Mlp::same_architecture(const Mlp& other) const {
    return layer_sizes == other.layer_sizes && hidden_activation == other.hidden_activation;
}

void Mlp::assert_finite(const std::string& label) const {
    for (size_t k = 0; k < weights.size(); ++k) {
        if (!weights[k].allFinite())
            throw_error(ErrorKind::Numeric, label + "/layer" + std::to_string(k) + "/weights contains non-finite values");
        if (!biases[k].allFinite())
            throw_error(ErrorKind::Numeric, label + "/layer" + std::to_string(k) + "/biases contains non-finite values");
    }
}

void Mlp::init(Rng& rng, double final_layer_scale) {
    for (size_t k = 0; k < weights.size(); ++k) {
        double bound = 1.0 / std::sqrt(static_cast<double>(weights[k].cols()));
        double s = (k + 1 == weights.size()) ? final_layer_scale : 1.0;
        for (Eigen::Index i = 0; i < weights[k].rows(); ++i)
            for (Eigen::Index j = 0; j < weights[k].cols(); ++j)
                weights[k](i, j) = s * rng.uniform(-bound, bound);
        for (Eigen::Index j = 0; j < biases[k].cols(); ++j)
            biases[k](0, j) = s * rng.uniform(-bound, bound);
    }
}

Vector Mlp::forward(const Vector& input) const {
    require(input.size() == input_dim(), ErrorKind::Structural, "mlp: input length does not match first layer width");
    Matrix row = input.transpose();
    Matrix out = forward(row);
    return out.row(0).transpose();
}

Matrix Mlp::forward(const Matrix& inputs) const {
    require(inputs.cols() == input_dim(), ErrorKind::Structural, "mlp: input width does not match first layer width");
    Matrix h = inputs;
    for (size_t k = 0; k < weights.size(); ++k) {
        Matrix z = h * weights[k].transpose();
        z.rowwise() += biases[k].row(0);
        if (k + 1 < weights.size()) {
            if (hidden_activation == Activation::Relu)
                h = z.cwiseMax(0.0);
            else
                h = z.array().tanh();
        } else {
            h = std::move(z);
        }
    }
    return h;
}

Value TapeNet::apply(Tape& t, Value input) const {
    Value h = input;
    for (size_t k = 0; k < weight_nodes.size(); ++k) {
        Value z = t.add_rowvec(t.matmul_nt(h, weight_nodes[k]), bias_nodes[k]);
        if (k + 1 < weight_nodes.size())
            h = (net->hidden_activation == Activation::Relu) ? t.relu(z) : t.tanh(z);
        else
            h = z;
    }
    return h;
}

TapeNet put_on_tape(Tape& t, const Mlp& net, bool trainable) {
    TapeNet tn;
    tn.net = &net;
    for (size_t k = 0; k < net.weights.size(); ++k) {
        tn.weight_nodes.push_back(trainable ? t.leaf(net.weights[k]) : t.constant(net.weights[k]));
        tn.bias_nodes.push_back(trainable ? t.leaf(net.biases[k]) : t.constant(net.biases[k]));
    }
    return tn;
}

MlpGrads collect_grads(const Tape& t, const TapeNet& tn) {
    MlpGrads g;
    for (size_t k = 0; k < tn.weight_nodes.size(); ++k) {
        g.weights.push_back(t.grad(tn.weight_nodes[k]));
        g.biases.push_back(t.grad(tn.bias_nodes[k]));
    }
    return g;
}

AdamState::AdamState(const Mlp& net, double lr) : learning_rate(lr) {
    for (size_t k = 0; k < net.weights.size(); ++k) {
        m_w.push_back(Matrix::Zero(net.weights[k].rows(), net.weights[k].cols()));
        v_w.push_back(Matrix::Zero(net.weights[k].rows(), net.weights[k].cols()));
        m_b.push_back(Matrix::Zero(1, net.biases[k].cols()));
        v_b.push_back(Matrix::Zero(1, net.biases[k].cols()));
    }
}

namespace {

void adam_step(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, const AdamState& opt,
               double bc1, double bc2, const std::string& path) {
    require(param.rows() == grad.rows() && param.cols() == grad.cols(), ErrorKind::Structural,
            path + ": gradient shape does not match parameter shape");
    if (!grad.allFinite()) throw_error(ErrorKind::Numeric, path + " received a non-finite gradient");
    m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
    v = opt.beta2 * v + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
    Matrix m_hat = m / bc1;
    Matrix v_hat = v / bc2;
    param -= opt.learning_rate * m_hat.cwiseQuotient(v_hat.cwiseSqrt().array().matrix() + Matrix::Constant(v_hat.rows(), v_hat.cols(), opt.epsilon));
}

}  // namespace

void apply_update(Mlp& net, const MlpGrads& grads, AdamState& opt, const std::string& label) {
    require(grads.weights.size() == net.weights.size() && grads.biases.size() == net.biases.size(),
            ErrorKind::Structural, label + ": gradient layer count does not match network");
    opt.step_count += 1;
    double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
    double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
    for (size_t k = 0; k < net.weights.size(); ++k) {
        std::string base = label + "/layer" + std::to_string(k);
        adam_step(net.weights[k], grads.weights[k], opt.m_w[k], opt.v_w[k], opt, bc1, bc2, base + "/weights");
        adam_step(net.biases[k], grads.biases[k], opt.m_b[k], opt.v_b[k], opt, bc1, bc2, base + "/biases");
    }
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
    require(target.same_architecture(online), ErrorKind::Structural, "soft_update: architecture mismatch");
    require(tau >= 0.0 && tau <= 1.0, ErrorKind::Structural, "soft_update: tau must lie in [0, 1]");
    for (size_t k = 0; k < target.weights.size(); ++k) {
        target.weights[k] = tau * online.weights[k] + (1.0 - tau) * target.weights[k];
        target.biases[k] = tau * online.biases[k] + (1.0 - tau) * target.biases[k];
    }
}

namespace {

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    b[0] = static_cast<unsigned char>(v & 0xff);
    b[1] = static_cast<unsigned char>((v >> 8) & 0xff);
    b[2] = static_cast<unsigned char>((v >> 16) & 0xff);
    b[3] = static_cast<unsigned char>((v >> 24) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    require(in.gcount() == 4, ErrorKind::Format, "mlp: truncated file while reading header field");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    require(in.gcount() == 8, ErrorKind::Format, "mlp: truncated file while reading parameters");
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_mlp(const Mlp& net, std::ostream& out) {
    out.write("SGNT", 4);
    write_u32(out, kMlpFormatVersion);
    write_u32(out, static_cast<uint32_t>(net.layer_count()));
    write_u32(out, net.hidden_activation == Activation::Relu ? 0u : 1u);
    for (int k = 0; k < net.layer_count(); ++k) {
        write_u32(out, static_cast<uint32_t>(net.weights[k].cols()));
        write_u32(out, static_cast<uint32_t>(net.weights[k].rows()));
        for (Eigen::Index i = 0; i < net.weights[k].rows(); ++i)
            for (Eigen::Index j = 0; j < net.weights[k].cols(); ++j) write_f64(out, net.weights[k](i, j));
        for (Eigen::Index j = 0; j < net.biases[k].cols(); ++j) write_f64(out, net.biases[k](0, j));
    }
}

void save_mlp(const Mlp& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorKind::Io, "mlp: cannot open '" + path + "' for writing");
    save_mlp(net, out);
    out.flush();
    require(out.good(), ErrorKind::Io, "mlp: write to '" + path + "' failed");
}

Mlp load_mlp(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    require(in.gcount() == 4 && std::memcmp(magic, "SGNT", 4) == 0, ErrorKind::Format,
            "mlp: bad magic, not a SGNT parameter file");
    uint32_t version = read_u32(in);
    require(version == kMlpFormatVersion, ErrorKind::Format,
            "mlp: format version " + std::to_string(version) + " unsupported (expected " +
                std::to_string(kMlpFormatVersion) + ")");
    uint32_t layers = read_u32(in);
    require(layers >= 1 && layers <= 64, ErrorKind::Format, "mlp: implausible layer count");
    uint32_t act = read_u32(in);
    require(act <= 1, ErrorKind::Format, "mlp: unknown activation tag");

    std::vector<int> sizes;
    Mlp net;
    net.hidden_activation = act == 0 ? Activation::Relu : Activation::Tanh;
    for (uint32_t k = 0; k < layers; ++k) {
        uint32_t in_dim = read_u32(in);
        uint32_t out_dim = read_u32(in);
        require(in_dim >= 1 && out_dim >= 1 && in_dim <= 1u << 20 && out_dim <= 1u << 20, ErrorKind::Format,
                "mlp: implausible layer dimensions");
        if (k == 0)
            sizes.push_back(static_cast<int>(in_dim));
        else
            require(static_cast<int>(in_dim) == sizes.back(), ErrorKind::Format,
                    "mlp: inconsistent consecutive layer dimensions");
        sizes.push_back(static_cast<int>(out_dim));
        Matrix w(out_dim, in_dim);
        for (uint32_t i = 0; i < out_dim; ++i)
            for (uint32_t j = 0; j < in_dim; ++j) w(i, j) = read_f64(in);
        Matrix b(1, out_dim);
        for (uint32_t j = 0; j < out_dim; ++j) b(0, j) = read_f64(in);
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    net.layer_sizes = std::move(sizes);
    return net;
}

Mlp load_mlp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::Io, "mlp: cannot open '" + path + "' for reading");
    return load_mlp(in);
}

}  // namespace sigent
