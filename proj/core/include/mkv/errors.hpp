#pragma once

#include <stdexcept>
#include <string>

namespace mkv {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RegistryError : public Error { public: using Error::Error; };
class EvaluationError : public Error { public: using Error::Error; };
class UnsupportedInput : public Error { public: using Error::Error; };
class DegenerateStep : public Error { public: using Error::Error; };
class CoverageError : public Error { public: using Error::Error; };
class MatrixError : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };
class ResolutionError : public Error { public: using Error::Error; };
class ConvergenceError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

}  // namespace mkv
