#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace protofsm {

// Broad failure classes. The numeric values double as CLI exit codes and as
// the C API status codes, so they must stay in sync with protofsm.h.
enum class ErrorClass : int {
  kInternal = 1,
  kConfig = 2,
  kRepo = 3,
  kInference = 4,
  kBackend = 5,
  kInput = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), class_(cls), kind_(std::move(kind)) {}

  ErrorClass error_class() const noexcept { return class_; }
  // Short error name, e.g. "SchemaError".
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorClass class_;
  std::string kind_;
};

#define PROTOFSM_DEFINE_ERROR(Name, Cls)                                  \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& message) : Error(Cls, #Name, message) {} \
  }

PROTOFSM_DEFINE_ERROR(ConfigError, ErrorClass::kConfig);
PROTOFSM_DEFINE_ERROR(IoError, ErrorClass::kRepo);
PROTOFSM_DEFINE_ERROR(EmptyRepo, ErrorClass::kRepo);
PROTOFSM_DEFINE_ERROR(NoModuleFound, ErrorClass::kRepo);
PROTOFSM_DEFINE_ERROR(UnknownProtocol, ErrorClass::kRepo);
PROTOFSM_DEFINE_ERROR(InputError, ErrorClass::kInput);
PROTOFSM_DEFINE_ERROR(NameError, ErrorClass::kInput);
PROTOFSM_DEFINE_ERROR(InvalidFsm, ErrorClass::kInput);
PROTOFSM_DEFINE_ERROR(ParseError, ErrorClass::kInput);
PROTOFSM_DEFINE_ERROR(IntegrityError, ErrorClass::kInput);
PROTOFSM_DEFINE_ERROR(IndexFormatError, ErrorClass::kInput);
PROTOFSM_DEFINE_ERROR(DimError, ErrorClass::kInput);
PROTOFSM_DEFINE_ERROR(TemplateMissing, ErrorClass::kInput);
PROTOFSM_DEFINE_ERROR(BackendMismatch, ErrorClass::kBackend);
PROTOFSM_DEFINE_ERROR(FixtureMiss, ErrorClass::kBackend);
PROTOFSM_DEFINE_ERROR(TimeoutError, ErrorClass::kBackend);
PROTOFSM_DEFINE_ERROR(TemplateError, ErrorClass::kInference);
PROTOFSM_DEFINE_ERROR(ParseFailure, ErrorClass::kInference);

#undef PROTOFSM_DEFINE_ERROR

class SchemaError : public Error {
 public:
  SchemaError(const std::string& message, std::vector<std::string> missing = {},
              std::vector<std::string> extra = {})
      : Error(ErrorClass::kInput, "SchemaError", message),
        missing_(std::move(missing)),
        extra_(std::move(extra)) {}

  const std::vector<std::string>& missing_keys() const noexcept { return missing_; }
  const std::vector<std::string>& extra_keys() const noexcept { return extra_; }

 private:
  std::vector<std::string> missing_;
  std::vector<std::string> extra_;
};

class BackendError : public Error {
 public:
  BackendError(const std::string& message, int attempts = 0, int http_status = 0)
      : Error(ErrorClass::kBackend, "BackendError", message),
        attempts_(attempts),
        http_status_(http_status) {}

  // Retry metadata: how many network attempts were made, last HTTP status.
  int attempts() const noexcept { return attempts_; }
  int http_status() const noexcept { return http_status_; }

 private:
  int attempts_;
  int http_status_;
};

// Every iteration of a stage failed to parse.
class StageFailed : public Error {
 public:
  StageFailed(const std::string& message, std::vector<std::string> raw_responses)
      : Error(ErrorClass::kInference, "StageFailed", message), raw_(std::move(raw_responses)) {}

  const std::vector<std::string>& raw_responses() const noexcept { return raw_; }

 private:
  std::vector<std::string> raw_;
};

}  // namespace protofsm
