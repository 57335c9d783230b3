#pragma once

#include <stdexcept>
#include <string>

namespace bp {

enum class ErrorKind {
  Dimension,
  Parameter,
  Contract,
  State,
  Parse,
  Split,
  Support,
  DegenerateInput,
  Vocabulary,
  Config,
  Divergence,
  Data,
  Io,
  UndefinedMetric,
};

const char* to_string(ErrorKind kind);

// Process exit code for an error surfaced by the command-line tool:
// 2 config/parameter, 3 training divergence, 4 data/shape, 5 I/O.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define BP_DEFINE_ERROR(Name, Kind)                                     \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& message) : Error(Kind, message) {} \
  };

BP_DEFINE_ERROR(DimensionError, ErrorKind::Dimension)
BP_DEFINE_ERROR(ParameterError, ErrorKind::Parameter)
BP_DEFINE_ERROR(ContractError, ErrorKind::Contract)
BP_DEFINE_ERROR(StateError, ErrorKind::State)
BP_DEFINE_ERROR(ParseError, ErrorKind::Parse)
BP_DEFINE_ERROR(SplitError, ErrorKind::Split)
BP_DEFINE_ERROR(SupportError, ErrorKind::Support)
BP_DEFINE_ERROR(DegenerateInputError, ErrorKind::DegenerateInput)
BP_DEFINE_ERROR(VocabularyError, ErrorKind::Vocabulary)
BP_DEFINE_ERROR(ConfigError, ErrorKind::Config)
BP_DEFINE_ERROR(DivergenceError, ErrorKind::Divergence)
BP_DEFINE_ERROR(DataError, ErrorKind::Data)
BP_DEFINE_ERROR(IoError, ErrorKind::Io)
BP_DEFINE_ERROR(UndefinedMetricError, ErrorKind::UndefinedMetric)

#undef BP_DEFINE_ERROR

}  // namespace bp
