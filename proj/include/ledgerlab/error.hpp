#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ledgerlab {

enum class ErrorCode {
    MalformedPayload,
    IndexGap,
    ConfigError,
    MissingOracle,
    OracleRefused,
    UnknownTrigger,
    SpecError,
    LogMismatch,
    InapplicableAttack,
    ParseError,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure the library reports carries one of the codes above so callers
/// (tests, the CLI exit-code mapping) can branch on cause instead of message text.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace ledgerlab
