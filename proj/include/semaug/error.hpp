#pragma once

#include <stdexcept>
#include <string>

namespace semaug {

// Every error carries a short machine-readable code; the CLI prints it as a
// line prefix and maps it to an exit status.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define SEMAUG_DEFINE_ERROR(Name, Code)                                   \
    class Name : public Error {                                           \
    public:                                                               \
        explicit Name(const std::string& what) : Error(Code, what) {}     \
    };

SEMAUG_DEFINE_ERROR(ParseError, "E_PARSE")
SEMAUG_DEFINE_ERROR(ValidationError, "E_VALIDATION")
SEMAUG_DEFINE_ERROR(ArgumentError, "E_ARGUMENT")
SEMAUG_DEFINE_ERROR(LookupError, "E_LOOKUP")
SEMAUG_DEFINE_ERROR(ConfigError, "E_CONFIG")
SEMAUG_DEFINE_ERROR(NumericError, "E_NUMERIC")
SEMAUG_DEFINE_ERROR(EncodingError, "E_ENCODING")
SEMAUG_DEFINE_ERROR(RetrievalError, "E_RETRIEVAL")
SEMAUG_DEFINE_ERROR(IoError, "E_IO")

#undef SEMAUG_DEFINE_ERROR

}  // namespace semaug
