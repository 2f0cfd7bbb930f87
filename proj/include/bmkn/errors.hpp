#pragma once

#include <stdexcept>
#include <string>

namespace bmkn {

/// Base class for all library errors.
struct CodecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mesh / IO
struct ParseError : CodecError { using CodecError::CodecError; };
struct LabelMismatch : CodecError { using CodecError::CodecError; };
struct IoError : CodecError { using CodecError::CodecError; };
struct ShapeMismatch : CodecError { using CodecError::CodecError; };

// Affine algebra
struct NonPositiveScale : CodecError { using CodecError::CodecError; };
struct SingularMatrix : CodecError { using CodecError::CodecError; };

// Deformation / solver
struct AlignmentError : CodecError { using CodecError::CodecError; };
struct NoValidNodes : CodecError { using CodecError::CodecError; };
struct EmptyNodeSet : CodecError { using CodecError::CodecError; };
struct TooFewVertices : CodecError { using CodecError::CodecError; };
struct DivergenceError : CodecError { using CodecError::CodecError; };

// Entropy coding
struct EmptyStream : CodecError { using CodecError::CodecError; };
struct TruncatedStream : CodecError { using CodecError::CodecError; };
struct BadEscape : CodecError { using CodecError::CodecError; };

// Predictive coding
struct MissingPreviousModel : CodecError { using CodecError::CodecError; };
struct UnlabeledNodes : CodecError { using CodecError::CodecError; };

// Container
struct BadMagic : CodecError { using CodecError::CodecError; };
struct VersionUnsupported : CodecError { using CodecError::CodecError; };
struct CorruptBlock : CodecError { using CodecError::CodecError; };
struct ConfigError : CodecError { using CodecError::CodecError; };

// CLI / synthetic data
struct UnknownScenario : CodecError { using CodecError::CodecError; };

}  // namespace bmkn
