#include "dorafactor/factored_norm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dorafactor {

namespace {

void check_shapes(const RealMatrix& w, const AdapterPair& adapter, const ChunkPlan& plan) {
    const index_t d_out = w.rows(), d_in = w.cols(), r = adapter.A.rows();
    if (adapter.A.cols() != d_in) {
        throw std::invalid_argument("factored_norm: A.cols != W.cols");
    }
    if (adapter.B.rows() != d_out || adapter.B.cols() != r) {
        throw std::invalid_argument("factored_norm: B shape inconsistent with W/A");
    }
    if (r < 1) throw std::invalid_argument("factored_norm: rank must be >= 1");
    if (plan.chunk_size < 1 || plan.num_chunks != (d_in + plan.chunk_size - 1) / plan.chunk_size) {
        throw std::invalid_argument("factored_norm: chunk plan does not match W.cols");
    }
}

}  // namespace

NormTerms factored_norm_terms(const RealMatrix& w, const AdapterPair& adapter, const ChunkPlan& plan) {
    if (w.dtype().kind == DTypeKind::FP64) {
        throw std::invalid_argument("factored_norm_terms: fp32 term accumulation requires non-FP64 weights");
    }
    check_shapes(w, adapter, plan);

    const index_t d_out = w.rows(), d_in = w.cols(), r = adapter.A.rows();
    const double* pw = w.data().data();
    const double* pa = adapter.A.data().data();
    const double* pb = adapter.B.data().data();
    const bool skip_adapter_terms = adapter.s == 0.0;

    NormTerms terms;
    terms.base_sq.assign(d_out, 0.0f);
    terms.cross.assign(d_out, 0.0f);
    terms.ba_sq.assign(d_out, 0.0f);
    terms.two_s = 2.0 * adapter.s;
    terms.s2 = adapter.s * adapter.s;

    std::vector<float> gram(skip_adapter_terms ? 0 : r * r, 0.0f);
    std::vector<float> u_chunk(skip_adapter_terms ? 0 : d_out * r);

    for (index_t c0 = 0; c0 < d_in; c0 += plan.chunk_size) {
        const index_t c1 = c0 + plan.chunk_size < d_in ? c0 + plan.chunk_size : d_in;

        // base_sq += rowsum(W_c^2), chunk partial reduced first
        for (index_t i = 0; i < d_out; ++i) {
            float partial = 0.0f;
            const double* wrow = pw + i * d_in;
            for (index_t k = c0; k < c1; ++k) {
                const float v = static_cast<float>(wrow[k]);
                partial += v * v;
            }
            terms.base_sq[i] += partial;
        }

        if (skip_adapter_terms) continue;

        // G += A_c * A_c^T
        for (index_t p = 0; p < r; ++p) {
            const double* ap = pa + p * d_in;
            for (index_t q = 0; q < r; ++q) {
                const double* aq = pa + q * d_in;
                float partial = 0.0f;
                for (index_t k = c0; k < c1; ++k) {
                    partial += static_cast<float>(ap[k]) * static_cast<float>(aq[k]);
                }
                gram[p * r + q] += partial;
            }
        }

        // U_c = W_c * A_c^T, fresh per chunk
        for (index_t i = 0; i < d_out; ++i) {
            const double* wrow = pw + i * d_in;
            for (index_t l = 0; l < r; ++l) {
                const double* arow = pa + l * d_in;
                float acc = 0.0f;
                for (index_t k = c0; k < c1; ++k) {
                    acc += static_cast<float>(wrow[k]) * static_cast<float>(arow[k]);
                }
                u_chunk[i * r + l] = acc;
            }
        }

        // cross += rowsum(B (.) U_c)
        for (index_t i = 0; i < d_out; ++i) {
            float partial = 0.0f;
            const double* brow = pb + i * r;
            const float* urow = u_chunk.data() + i * r;
            for (index_t l = 0; l < r; ++l) {
                partial += static_cast<float>(brow[l]) * urow[l];
            }
            terms.cross[i] += partial;
        }
    }

    if (!skip_adapter_terms) {
        // ba_sq = rowsum((B*G) (.) B)
        for (index_t i = 0; i < d_out; ++i) {
            const double* brow = pb + i * r;
            float rowsum = 0.0f;
            for (index_t l = 0; l < r; ++l) {
                float bg = 0.0f;
                for (index_t q = 0; q < r; ++q) {
                    bg += static_cast<float>(brow[q]) * gram[q * r + l];
                }
                rowsum += bg * static_cast<float>(brow[l]);
            }
            terms.ba_sq[i] = rowsum;
        }
    }

    return terms;
}

std::vector<float> assemble_norm(const NormTerms& terms) {
    const index_t n = terms.base_sq.size();
    if (terms.cross.size() != n || terms.ba_sq.size() != n) {
        throw std::invalid_argument("assemble_norm: term vectors differ in length");
    }
    std::vector<float> out(n);
    for (index_t j = 0; j < n; ++j) {
        const float c1 = static_cast<float>(terms.two_s * static_cast<double>(terms.cross[j]));
        const float t1 = terms.base_sq[j] + c1;
        const float c2 = static_cast<float>(terms.s2 * static_cast<double>(terms.ba_sq[j]));
        const float t2 = t1 + c2;
        out[j] = correctly_rounded_sqrt_f32(nan_preserving_clamp_min(t2, 0.0f));
    }
    return out;
}

namespace {

// All-fp64 variant; only test oracles route FP64 weights through here.
std::vector<double> factored_row_norm_f64(const RealMatrix& w, const AdapterPair& adapter,
                                          const ChunkPlan& plan) {
    const index_t d_out = w.rows(), d_in = w.cols(), r = adapter.A.rows();
    const double* pw = w.data().data();
    const double* pa = adapter.A.data().data();
    const double* pb = adapter.B.data().data();
    const double s = adapter.s;

    std::vector<double> base_sq(d_out, 0.0), cross(d_out, 0.0), ba_sq(d_out, 0.0);
    std::vector<double> gram(s == 0.0 ? 0 : r * r, 0.0);

    for (index_t c0 = 0; c0 < d_in; c0 += plan.chunk_size) {
        const index_t c1 = c0 + plan.chunk_size < d_in ? c0 + plan.chunk_size : d_in;
        for (index_t i = 0; i < d_out; ++i) {
            double partial = 0.0;
            const double* wrow = pw + i * d_in;
            for (index_t k = c0; k < c1; ++k) partial += wrow[k] * wrow[k];
            base_sq[i] += partial;
        }
        if (s == 0.0) continue;
        for (index_t p = 0; p < r; ++p) {
            for (index_t q = 0; q < r; ++q) {
                double partial = 0.0;
                for (index_t k = c0; k < c1; ++k) partial += pa[p * d_in + k] * pa[q * d_in + k];
                gram[p * r + q] += partial;
            }
        }
        for (index_t i = 0; i < d_out; ++i) {
            const double* wrow = pw + i * d_in;
            double partial = 0.0;
            for (index_t l = 0; l < r; ++l) {
                double u = 0.0;
                const double* arow = pa + l * d_in;
                for (index_t k = c0; k < c1; ++k) u += wrow[k] * arow[k];
                partial += pb[i * r + l] * u;
            }
            cross[i] += partial;
        }
    }
    if (s != 0.0) {
        for (index_t i = 0; i < d_out; ++i) {
            const double* brow = pb + i * r;
            double rowsum = 0.0;
            for (index_t l = 0; l < r; ++l) {
                double bg = 0.0;
                for (index_t q = 0; q < r; ++q) bg += brow[q] * gram[q * r + l];
                rowsum += bg * brow[l];
            }
            ba_sq[i] = rowsum;
        }
    }

    std::vector<double> out(d_out);
    for (index_t j = 0; j < d_out; ++j) {
        const double t = base_sq[j] + 2.0 * s * cross[j] + s * s * ba_sq[j];
        const double clamped = std::isnan(t) ? t : (t < 0.0 ? 0.0 : t);
        out[j] = std::sqrt(clamped);
    }
    return out;
}

}  // namespace

std::vector<double> factored_row_norm(const RealMatrix& w, const AdapterPair& adapter,
                                      const ChunkPlan& plan) {
    if (w.dtype().kind == DTypeKind::FP64) {
        check_shapes(w, adapter, plan);
        return factored_row_norm_f64(w, adapter, plan);
    }
    const NormTerms terms = factored_norm_terms(w, adapter, plan);
    const std::vector<float> norm32 = assemble_norm(terms);
    std::vector<double> out(norm32.size());
    for (index_t j = 0; j < out.size(); ++j) {
        out[j] = round_to_dtype(static_cast<double>(norm32[j]), w.dtype());
    }
    return out;
}

std::vector<double> magnitude_scale(const Magnitude& m, const std::vector<double>& w_norm,
                                    const DTypeSpec& dtype) {
    if (m.values.size() != w_norm.size()) {
        throw std::invalid_argument("magnitude_scale: length mismatch");
    }
    std::vector<double> g(m.values.size());
    if (dtype.kind == DTypeKind::FP64) {
        for (index_t j = 0; j < g.size(); ++j) {
            const double denom = w_norm[j] < dtype.norm_eps ? dtype.norm_eps : w_norm[j];
            g[j] = m.values[j] / denom;
        }
        return g;
    }
    const float eps = static_cast<float>(dtype.norm_eps);
    for (index_t j = 0; j < g.size(); ++j) {
        const float wn = static_cast<float>(w_norm[j]);
        const float denom = wn < eps ? eps : wn;
        const float q = static_cast<float>(m.values[j]) / denom;
        g[j] = round_to_dtype(static_cast<double>(q), dtype);
    }
    return g;
}

}  // namespace dorafactor
