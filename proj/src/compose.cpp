#include "dorafactor/compose.hpp"

#include <stdexcept>

namespace dorafactor {

namespace {

void check_inputs(const ComposeInputs& in) {
    if (in.base.rows() != in.lora.rows() || in.base.cols() != in.lora.cols()) {
        throw std::invalid_argument("compose: base/lora shapes differ");
    }
    if (in.g.size() != in.base.cols()) {
        throw std::invalid_argument("compose: g length != d_out");
    }
}

// One element of the canonical stable form, fp32 throughout.
inline float stable_element(float base, float lora, float g, float s) {
    const float t = s * lora;
    const float u = g * t;
    const float v = (g - 1.0f) * base;
    return v + u;
}

}  // namespace

RealMatrix stable_compose(const ComposeInputs& in) {
    check_inputs(in);
    const index_t rows = in.base.rows(), d_out = in.base.cols();
    RealMatrix delta(rows, d_out, in.dtype);
    const double* pb = in.base.data().data();
    const double* pl = in.lora.data().data();
    double* pd = delta.mutable_data().data();
    const float sf = static_cast<float>(in.s);
    for (index_t i = 0; i < rows; ++i) {
        for (index_t j = 0; j < d_out; ++j) {
            const float gf = static_cast<float>(in.g[j]);
            const float r = stable_element(static_cast<float>(pb[i * d_out + j]),
                                           static_cast<float>(pl[i * d_out + j]), gf, sf);
            pd[i * d_out + j] = round_to_dtype(static_cast<double>(r), in.dtype);
        }
    }
    return delta;
}

RealMatrix naive_compose(const ComposeInputs& in) {
    check_inputs(in);
    const index_t rows = in.base.rows(), d_out = in.base.cols();
    RealMatrix delta(rows, d_out, in.dtype);
    const double* pb = in.base.data().data();
    const double* pl = in.lora.data().data();
    double* pd = delta.mutable_data().data();
    const float sf = static_cast<float>(in.s);
    const DTypeSpec& dt = in.dtype;
    auto rnd = [&dt](float x) { return static_cast<float>(round_to_dtype(static_cast<double>(x), dt)); };
    for (index_t i = 0; i < rows; ++i) {
        for (index_t j = 0; j < d_out; ++j) {
            const float base = static_cast<float>(pb[i * d_out + j]);
            const float gf = static_cast<float>(in.g[j]);
            const float t1 = rnd(sf * static_cast<float>(pl[i * d_out + j]));
            const float t2 = rnd(t1 + base);
            const float t3 = rnd(gf * t2);
            pd[i * d_out + j] = round_to_dtype(static_cast<double>(t3 - base), dt);
        }
    }
    return delta;
}

FusedResult fused_compose(const ComposeInputs& in, index_t tile_rows) {
    check_inputs(in);
    if (!in.base.contiguous() || !in.lora.contiguous()) {
        throw std::invalid_argument("fused_compose: inputs must be contiguous (dispatch routes "
                                    "non-contiguous tensors to the eager path)");
    }
    if (tile_rows < 1) tile_rows = 1;
    const index_t rows = in.base.rows(), d_out = in.base.cols();
    FusedResult out{RealMatrix(rows, d_out, in.dtype), TrafficReport{}};
    const double* pb = in.base.data().data();
    const double* pl = in.lora.data().data();
    double* pd = out.delta.mutable_data().data();
    const float sf = static_cast<float>(in.s);

    std::uint64_t g_reads = 0;
    for (index_t t0 = 0; t0 < rows; t0 += tile_rows) {
        const index_t t1 = t0 + tile_rows < rows ? t0 + tile_rows : rows;
        ++g_reads;  // each tile streams g once
        for (index_t i = t0; i < t1; ++i) {
            for (index_t j = 0; j < d_out; ++j) {
                const float r = stable_element(static_cast<float>(pb[i * d_out + j]),
                                               static_cast<float>(pl[i * d_out + j]),
                                               static_cast<float>(in.g[j]), sf);
                pd[i * d_out + j] = round_to_dtype(static_cast<double>(r), in.dtype);
            }
        }
    }
    if (rows == 0) g_reads = 0;

    const std::uint64_t act = static_cast<std::uint64_t>(rows) * d_out;
    const std::uint64_t elem = static_cast<std::uint64_t>(in.dtype.storage_bytes);
    out.traffic.activation_reads = 2;
    out.traffic.activation_writes = 1;
    out.traffic.vector_reads = g_reads;
    out.traffic.bytes_total = 3 * act * elem + g_reads * static_cast<std::uint64_t>(d_out) * elem;
    out.traffic.pass_count = 1;
    return out;
}

DualResult dual_output_compose(const ComposeInputs& in, bool need_inner, index_t tile_rows) {
    check_inputs(in);
    if (!in.base.contiguous() || !in.lora.contiguous()) {
        throw std::invalid_argument("dual_output_compose: inputs must be contiguous");
    }
    if (tile_rows < 1) tile_rows = 1;
    const index_t rows = in.base.rows(), d_out = in.base.cols();
    DualResult out{RealMatrix(rows, d_out, in.dtype), std::nullopt, TrafficReport{}};
    if (need_inner) out.inner.emplace(rows, d_out, in.dtype);
    const double* pb = in.base.data().data();
    const double* pl = in.lora.data().data();
    double* pd = out.delta.mutable_data().data();
    double* pi = need_inner ? out.inner->mutable_data().data() : nullptr;
    const float sf = static_cast<float>(in.s);

    std::uint64_t g_reads = 0;
    for (index_t t0 = 0; t0 < rows; t0 += tile_rows) {
        const index_t t1 = t0 + tile_rows < rows ? t0 + tile_rows : rows;
        ++g_reads;
        for (index_t i = t0; i < t1; ++i) {
            for (index_t j = 0; j < d_out; ++j) {
                const float base = static_cast<float>(pb[i * d_out + j]);
                const float lora = static_cast<float>(pl[i * d_out + j]);
                const float gf = static_cast<float>(in.g[j]);
                const float t = sf * lora;
                const float u = gf * t;
                const float v = (gf - 1.0f) * base;
                pd[i * d_out + j] = round_to_dtype(static_cast<double>(v + u), in.dtype);
                if (pi) pi[i * d_out + j] = round_to_dtype(static_cast<double>(t + base), in.dtype);
            }
        }
    }
    if (rows == 0) g_reads = 0;

    const std::uint64_t act = static_cast<std::uint64_t>(rows) * d_out;
    const std::uint64_t elem = static_cast<std::uint64_t>(in.dtype.storage_bytes);
    out.traffic.activation_reads = 2;
    out.traffic.activation_writes = need_inner ? 2 : 1;
    out.traffic.vector_reads = g_reads;
    out.traffic.bytes_total = (2 + out.traffic.activation_writes) * act * elem +
                              g_reads * static_cast<std::uint64_t>(d_out) * elem;
    out.traffic.pass_count = 1;
    return out;
}

GradBundle compose_backward(const RealMatrix& d_y, const std::vector<double>& g, double s,
                            const RealMatrix* inner, const std::vector<double>& w_norm,
                            bool mag_grad) {
    const index_t rows = d_y.rows(), d_out = d_y.cols();
    if (g.size() != d_out) throw std::invalid_argument("compose_backward: g length != d_out");
    if (mag_grad) {
        if (inner == nullptr) {
            throw std::invalid_argument("compose_backward: magnitude gradient requires inner");
        }
        if (inner->rows() != rows || inner->cols() != d_out) {
            throw std::invalid_argument("compose_backward: inner shape mismatch");
        }
        if (w_norm.size() != d_out) {
            throw std::invalid_argument("compose_backward: w_norm length != d_out");
        }
    }

    GradBundle out{RealMatrix(rows, d_out, d_y.dtype()), RealMatrix(rows, d_out, d_y.dtype()),
                   std::nullopt};
    const double* pdy = d_y.data().data();
    double* pl = out.d_lora.mutable_data().data();
    double* pb = out.d_base.mutable_data().data();
    const float sf = static_cast<float>(s);
    for (index_t i = 0; i < rows; ++i) {
        for (index_t j = 0; j < d_out; ++j) {
            const float dy = static_cast<float>(pdy[i * d_out + j]);
            const float gf = static_cast<float>(g[j]);
            const float t = sf * dy;
            pl[i * d_out + j] = round_to_dtype(static_cast<double>(gf * t), d_y.dtype());
            pb[i * d_out + j] = round_to_dtype(static_cast<double>((gf - 1.0f) * dy), d_y.dtype());
        }
    }

    if (mag_grad) {
        // Serial per-column reduction, rows ascending; one divide at the end.
        std::vector<double> d_mag(d_out);
        const double* pin = inner->data().data();
        for (index_t j = 0; j < d_out; ++j) {
            float acc = 0.0f;
            for (index_t i = 0; i < rows; ++i) {
                acc += static_cast<float>(pdy[i * d_out + j]) * static_cast<float>(pin[i * d_out + j]);
            }
            d_mag[j] = static_cast<double>(acc / static_cast<float>(w_norm[j]));
        }
        out.d_mag = std::move(d_mag);
    }
    return out;
}

TrafficReport eager_traffic_model(index_t rows, index_t d_out, const DTypeSpec& dtype) {
    // Kernel sequence: t1 = s*lora; t2 = g (.) t1; t3 = (g-1) (.) base;
    // delta = t3 + t2. Broadcast g streams count as one pass each, matching
    // how the fused report counts g as its third read stream.
    TrafficReport rep;
    rep.activation_reads = 1 + 1 + 1 + 2;
    rep.activation_writes = 4;
    rep.vector_reads = 2;
    rep.pass_count = static_cast<int>(rep.activation_reads + rep.activation_writes + rep.vector_reads);
    const std::uint64_t act = static_cast<std::uint64_t>(rows) * d_out;
    const std::uint64_t elem = static_cast<std::uint64_t>(dtype.storage_bytes);
    rep.bytes_total = (rep.activation_reads + rep.activation_writes) * act * elem +
                      rep.vector_reads * static_cast<std::uint64_t>(d_out) * elem;
    return rep;
}

}  // namespace dorafactor
