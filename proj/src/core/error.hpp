#ifndef MEMLAYOUT_CORE_ERROR_HPP
#define MEMLAYOUT_CORE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace memlayout {

enum class ErrorCode {
  Io,
  Schema,
  Semantic,
  Infeasible,
  Budget,
  Range,
  Alignment,
  Format,
  MalformedImage,
  Decode,
  UnknownSpace,
  Agent,
  Trace,
  BackendMismatch,
  InvalidArgument,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct SchemaError : Error {
  SchemaError(std::string file, int line, const std::string& message)
      : Error(ErrorCode::Schema, file + ":" + std::to_string(line) + ": " + message),
        file(std::move(file)), line(line) {}
  std::string file;
  int line;
};

struct SemanticError : Error {
  SemanticError(std::string file, int line, const std::string& message)
      : Error(ErrorCode::Semantic, file + ":" + std::to_string(line) + ": " + message),
        file(std::move(file)), line(line) {}
  std::string file;
  int line;
};

struct InfeasibleError : Error {
  InfeasibleError(std::string subject, std::string constraint, const std::string& message)
      : Error(ErrorCode::Infeasible, subject + ": " + constraint + ": " + message),
        subject(std::move(subject)), constraint(std::move(constraint)) {}
  std::string subject;     // which block or space failed
  std::string constraint;  // which constraint was violated
};

struct BudgetError : Error {
  BudgetError(std::string space, unsigned needed, unsigned budget, const std::string& message)
      : Error(ErrorCode::Budget, message), space(std::move(space)), needed(needed),
        budget(budget) {}
  std::string space;
  unsigned needed;
  unsigned budget;
};

struct RangeError : Error {
  explicit RangeError(const std::string& message) : Error(ErrorCode::Range, message) {}
};

struct AlignmentError : Error {
  explicit AlignmentError(const std::string& message) : Error(ErrorCode::Alignment, message) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& message) : Error(ErrorCode::Format, message) {}
};

struct MalformedImageError : Error {
  explicit MalformedImageError(const std::string& message)
      : Error(ErrorCode::MalformedImage, message) {}
};

struct DecodeError : Error {
  explicit DecodeError(const std::string& message) : Error(ErrorCode::Decode, message) {}
};

struct UnknownSpaceError : Error {
  explicit UnknownSpaceError(const std::string& space)
      : Error(ErrorCode::UnknownSpace, "unknown address space: " + space) {}
};

struct AgentError : Error {
  explicit AgentError(const std::string& message) : Error(ErrorCode::Agent, message) {}
};

struct TraceError : Error {
  TraceError(int line, const std::string& message)
      : Error(ErrorCode::Trace, "trace line " + std::to_string(line) + ": " + message),
        line(line) {}
  int line;
};

}  // namespace memlayout

#endif
