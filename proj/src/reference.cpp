#include "dorafactor/reference.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dorafactor {

namespace {

void check_adapter(const RealMatrix& w, const AdapterPair& adapter) {
    if (adapter.A.cols() != w.cols() || adapter.B.rows() != w.rows() ||
        adapter.A.rows() != adapter.B.cols()) {
        throw std::invalid_argument("oracle: adapter shapes inconsistent with W");
    }
}

std::vector<double> row_norms_of_sum(const RealMatrix& w, const RealMatrix& ba, double s) {
    std::vector<double> out(w.rows());
    for (index_t i = 0; i < w.rows(); ++i) {
        double acc = 0.0;
        for (index_t j = 0; j < w.cols(); ++j) {
            const double v = w(i, j) + s * ba(i, j);
            acc += v * v;
        }
        out[i] = std::sqrt(acc);
    }
    return out;
}

}  // namespace

RealMatrix matmul_f64(const RealMatrix& a, const RealMatrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul_f64: inner dimensions disagree");
    RealMatrix out(a.rows(), b.cols(), DTypeSpec::fp64());
    for (index_t i = 0; i < a.rows(); ++i) {
        for (index_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (index_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
            out.mutable_data()[i * b.cols() + j] = acc;
        }
    }
    return out;
}

std::vector<double> dense_row_norm_f64(const RealMatrix& w, const AdapterPair& adapter) {
    check_adapter(w, adapter);
    const RealMatrix ba = matmul_f64(adapter.B, adapter.A);
    return row_norms_of_sum(w, ba, adapter.s);
}

OracleNormResult peft_identity_norm(const RealMatrix& w, const AdapterPair& adapter,
                                    index_t dim_cap) {
    check_adapter(w, adapter);
    const index_t d_in = w.cols();
    if (d_in > dim_cap) {
        throw std::invalid_argument("peft_identity_norm: d_in " + std::to_string(d_in) +
                                    " exceeds the identity-materialization cap of " +
                                    std::to_string(dim_cap));
    }
    RealMatrix identity(d_in, d_in, DTypeSpec::fp64());
    for (index_t i = 0; i < d_in; ++i) identity.mutable_data()[i * d_in + i] = 1.0;

    // (B @ (A @ I)) reproduces the baseline's data flow literally.
    const RealMatrix ai = matmul_f64(adapter.A, identity);
    const RealMatrix ba = matmul_f64(adapter.B, ai);

    OracleNormResult result;
    const std::vector<double> norms = row_norms_of_sum(w, ba, adapter.s);
    result.w_norm.resize(norms.size());
    for (index_t i = 0; i < norms.size(); ++i) {
        result.w_norm[i] = round_to_dtype(norms[i], w.dtype());
    }
    result.ledger = dense_baseline_bytes(w.rows(), d_in, w.dtype(), /*with_identity=*/true);
    return result;
}

OracleNormResult dense_ba_norm(const RealMatrix& w, const AdapterPair& adapter, index_t dim_cap) {
    check_adapter(w, adapter);
    if (w.cols() > dim_cap) {
        throw std::invalid_argument("dense_ba_norm: d_in exceeds the dense-product cap");
    }
    OracleNormResult result;
    const std::vector<double> norms = dense_row_norm_f64(w, adapter);
    result.w_norm.resize(norms.size());
    for (index_t i = 0; i < norms.size(); ++i) {
        result.w_norm[i] = round_to_dtype(norms[i], w.dtype());
    }
    result.ledger = dense_baseline_bytes(w.rows(), w.cols(), w.dtype(), /*with_identity=*/false);
    return result;
}

RealMatrix dense_composed_weight(const RealMatrix& w, const AdapterPair& adapter,
                                 const Magnitude& m) {
    check_adapter(w, adapter);
    if (m.values.size() != w.rows()) {
        throw std::invalid_argument("dense_composed_weight: magnitude length != d_out");
    }
    const RealMatrix ba = matmul_f64(adapter.B, adapter.A);
    const std::vector<double> norms = row_norms_of_sum(w, ba, adapter.s);
    RealMatrix out(w.rows(), w.cols(), DTypeSpec::fp64());
    const double eps = w.dtype().norm_eps;
    for (index_t i = 0; i < w.rows(); ++i) {
        const double denom = norms[i] < eps ? eps : norms[i];
        const double scale = m.values[i] / denom;
        for (index_t j = 0; j < w.cols(); ++j) {
            out.mutable_data()[i * w.cols() + j] = scale * (w(i, j) + adapter.s * ba(i, j));
        }
    }
    return out;
}

RealMatrix oracle_forward(const RealMatrix& x, const RealMatrix& w,
                          const std::vector<double>* bias, const AdapterPair& adapter,
                          const Magnitude& m) {
    if (x.cols() != w.cols()) throw std::invalid_argument("oracle_forward: X.cols != d_in");
    if (bias && bias->size() != w.rows()) {
        throw std::invalid_argument("oracle_forward: bias length != d_out");
    }
    const RealMatrix composed = dense_composed_weight(w, adapter, m);
    RealMatrix y(x.rows(), w.rows(), DTypeSpec::fp64());
    for (index_t i = 0; i < x.rows(); ++i) {
        for (index_t o = 0; o < w.rows(); ++o) {
            double acc = 0.0;
            for (index_t k = 0; k < x.cols(); ++k) acc += x(i, k) * composed(o, k);
            if (bias) acc += (*bias)[o];
            y.mutable_data()[i * w.rows() + o] = acc;
        }
    }
    return y;
}

}  // namespace dorafactor
