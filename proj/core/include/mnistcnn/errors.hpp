#pragma once

#include <stdexcept>
#include <string>

namespace mcnn {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// IDX parsing
struct WrongMagic : Error { using Error::Error; };
struct Truncated : Error { using Error::Error; };
struct BadDims : Error { using Error::Error; };
struct BadLabel : Error { using Error::Error; };

// tensor / layer contracts
struct ShapeMismatch : Error { using Error::Error; };
struct BatchTooSmall : Error { using Error::Error; };
struct ModeMismatch : Error { using Error::Error; };
struct OddSpatialDim : Error { using Error::Error; };
struct NonFiniteGradient : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };

// checkpoints
struct VersionMismatch : Error { using Error::Error; };
struct FingerprintMismatch : Error { using Error::Error; };
struct CorruptFile : Error { using Error::Error; };

// ensembles / stats
struct UnknownMember : Error { using Error::Error; };
struct PoolTooSmall : Error { using Error::Error; };
struct TooFewSamples : Error { using Error::Error; };
struct BandOutOfRange : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };

// cli
struct UnknownModel : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct DigestMismatch : Error { using Error::Error; };
struct DownloadFailed : Error { using Error::Error; };

}  // namespace mcnn
