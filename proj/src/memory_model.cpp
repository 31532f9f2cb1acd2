#include "dorafactor/memory_model.hpp"

namespace dorafactor {

double theoretical_reduction(index_t d_out, index_t d_in, index_t r) {
    const double dense = static_cast<double>(d_out) * static_cast<double>(d_in);
    const double factored = static_cast<double>(d_out) * static_cast<double>(r) +
                            static_cast<double>(r) * static_cast<double>(r);
    return dense / factored;
}

MemoryEstimate factored_transient_bytes(const ChunkPlan& plan, index_t d_out, index_t r,
                                        bool s_zero, bool weights_need_widening) {
    (void)weights_need_widening;  // same [d_out, cs] workspace either way
    const std::uint64_t cs = plan.chunk_size;
    MemoryEstimate est;
    est.persistent_bytes = 0;
    const std::uint64_t chunk_buffer = static_cast<std::uint64_t>(d_out) * cs * 4;
    const std::uint64_t a_chunk = static_cast<std::uint64_t>(r) * cs * 4;
    const std::uint64_t u_bytes = s_zero ? 0 : static_cast<std::uint64_t>(d_out) * r * 4;
    const std::uint64_t g_bytes = s_zero ? 0 : static_cast<std::uint64_t>(r) * r * 4;
    const std::uint64_t accumulators = 3ULL * d_out * 4;
    est.transient_bytes = chunk_buffer + a_chunk + u_bytes + g_bytes + accumulators;
    est.identity_bytes = 0;
    const std::uint64_t dense = static_cast<std::uint64_t>(d_out) * cs * plan.num_chunks * 4;
    est.reduction_ratio_vs_dense =
        est.transient_bytes ? static_cast<double>(dense) / static_cast<double>(est.transient_bytes)
                            : 0.0;
    return est;
}

MemoryEstimate dense_baseline_bytes(index_t d_out, index_t d_in, const DTypeSpec& dtype,
                                    bool with_identity) {
    const std::uint64_t elem = static_cast<std::uint64_t>(dtype.storage_bytes);
    MemoryEstimate est;
    est.identity_bytes = with_identity ? static_cast<std::uint64_t>(d_in) * d_in * elem : 0;
    const std::uint64_t weight_sized = static_cast<std::uint64_t>(d_out) * d_in * elem;
    // dense BA product + composed-weight copy
    est.transient_bytes = est.identity_bytes + 2 * weight_sized;
    est.persistent_bytes = 0;
    est.reduction_ratio_vs_dense = 1.0;
    return est;
}

const std::vector<ShapeRank>& theory_table_shapes() {
    static const std::vector<ShapeRank> shapes = {
        {4096, 4096, 64},  {4096, 4096, 384},  {4096, 4096, 512},
        {8192, 8192, 384}, {8192, 8192, 512},  {8192, 8192, 768},
        {4096, 11008, 384}, {8192, 28672, 384},
    };
    return shapes;
}

std::vector<TheoryTableRow> emit_theory_table(const std::vector<ShapeRank>& shapes) {
    std::vector<TheoryTableRow> rows;
    rows.reserve(shapes.size());
    for (const auto& s : shapes) {
        rows.push_back({s.d_out, s.d_in, s.rank, theoretical_reduction(s.d_out, s.d_in, s.rank)});
    }
    return rows;
}

}  // namespace dorafactor
