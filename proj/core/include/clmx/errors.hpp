#pragma once

#include <stdexcept>
#include <string>

namespace clmx {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// corpus
struct InvalidWord : Error { using Error::Error; };
struct EncodingError : Error { using Error::Error; };

// neuralcore / training
struct NonFinite : Error { using Error::Error; };
struct VocabMismatch : Error { using Error::Error; };
struct BadDepth : Error { using Error::Error; };

// checkpoint files
struct TruncatedFile : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };

// evaluation
struct EmptyStream : Error { using Error::Error; };
struct StreamMismatch : Error { using Error::Error; };
struct MissingClass : Error { using Error::Error; };

// analysis
struct DegenerateInput : Error { using Error::Error; };

}  // namespace clmx
