#include "amsdb/kernels.hpp"

namespace amsdb::kern {

const Kernels& scalar_table() {
    static const Kernels t = {
        "scalar",
        &ref::gemm<float>,
        &ref::unary_fwd<float>,
        &ref::unary_bwd<float>,
        &ref::binary_fwd<float>,
        &ref::binary_scalar_fwd<float>,
        &ref::axpy<float>,
        &ref::addmul<float>,
        &ref::reduce_sum<float>,
        &ref::dwconv_valid_fwd<float>,
        &ref::dwconv_valid_bwd_input<float>,
        &ref::dwconv_valid_bwd_kernel<float>,
        &ref::scan_core_fwd<float>,
        &ref::scan_core_bwd<float>,
        &ref::adam_update<float>,
    };
    return t;
}

}  // namespace amsdb::kern
