#pragma once

#include <stdexcept>
#include <string>

namespace morphocf {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Dataset / encoding
class UnknownCategory : public Error { public: using Error::Error; };
class MissingColumn : public Error { public: using Error::Error; };
class NonNumericCell : public Error { public: using Error::Error; };
class EmptyDataset : public Error { public: using Error::Error; };
class OutOfBounds : public Error { public: using Error::Error; };
class InvalidOneHot : public Error { public: using Error::Error; };
class NonIntegralDiscrete : public Error { public: using Error::Error; };
class WidthMismatch : public Error { public: using Error::Error; };
class BadSchema : public Error { public: using Error::Error; };

// Predictors
class EmptyTrainingSet : public Error { public: using Error::Error; };
class ShapeMismatch : public Error { public: using Error::Error; };
class CorruptWeights : public Error { public: using Error::Error; };
class ProcessExit : public Error { public: using Error::Error; };
class ProtocolViolation : public Error { public: using Error::Error; };
class Timeout : public Error { public: using Error::Error; };

// Coverage / explanation
class FingerprintMismatch : public Error { public: using Error::Error; };
class CorruptFile : public Error { public: using Error::Error; };
class EmptyCoverage : public Error { public: using Error::Error; };
class NoOpposingBalls : public Error { public: using Error::Error; };
class CoverageMismatch : public Error { public: using Error::Error; };

// Evaluation
class EmptyEvaluation : public Error { public: using Error::Error; };

} // namespace morphocf
