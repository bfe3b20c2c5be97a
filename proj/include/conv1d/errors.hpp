#pragma once

#include <stdexcept>
#include <string>

namespace conv1d {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand dimensions do not line up (tensor/matrix shape contracts).
struct ShapeMismatch : Error {
    using Error::Error;
};

// Channel-pair packing requested on a tensor with an odd channel count.
struct OddChannels : Error {
    using Error::Error;
};

// BF16 kernels require even channel, filter, and width counts.
struct OddDims : Error {
    using Error::Error;
};

// BF16 batch-reduce GEMM requires an even reduction dimension.
struct OddReduction : Error {
    using Error::Error;
};

// Batch-reduce GEMM invoked with an empty block list.
struct EmptyBatch : Error {
    using Error::Error;
};

// Padded input narrower than the filter's receptive field.
struct TooNarrow : Error {
    using Error::Error;
};

// Efficiency computation needs a positive duration and machine peak.
struct NonPositiveTime : Error {
    using Error::Error;
};

// Malformed or incomplete sweep configuration.
struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Training loss became NaN/Inf.
struct NonFiniteLoss : Error {
    using Error::Error;
};

// A probed function returned NaN/Inf during gradient checking.
struct NonFinite : Error {
    using Error::Error;
};

} // namespace conv1d
