#pragma once

#include <stdexcept>
#include <string>

namespace pathjoin {

// Every engine error derives from EngineError; `stage()` attributes the
// failure to a pipeline stage for CLI reporting.
class EngineError : public std::runtime_error {
 public:
  EngineError(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

class ParseError : public EngineError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : EngineError("parse", "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class QueryError : public EngineError {
 public:
  explicit QueryError(const std::string& what) : EngineError("query", what) {}
};

class PlanError : public EngineError {
 public:
  explicit PlanError(const std::string& what) : EngineError("plan", what) {}
};

class RuntimeError : public EngineError {
 public:
  explicit RuntimeError(const std::string& what) : EngineError("runtime", what) {}
};

class StoreError : public EngineError {
 public:
  explicit StoreError(const std::string& what) : EngineError("store", what) {}
};

}  // namespace pathjoin
