#include "bridgeprompt/error.hpp"

namespace bp {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::Contract: return "contract error";
    case ErrorKind::State: return "state error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Split: return "split error";
    case ErrorKind::Support: return "support error";
    case ErrorKind::DegenerateInput: return "degenerate input";
    case ErrorKind::Vocabulary: return "vocabulary error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::UndefinedMetric: return "undefined metric";
  }
  return "error";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Parameter:
    case ErrorKind::Vocabulary:
    case ErrorKind::Contract:
      return 2;
    case ErrorKind::Divergence:
      return 3;
    case ErrorKind::Io:
      return 5;
    default:
      return 4;
  }
}

}  // namespace bp
