#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace gapdyn {

/// Base of all library errors. `code()` is a stable machine-readable tag;
/// `what()` carries the human-readable detail.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define GAPDYN_DEFINE_ERROR(Name)                                        \
    class Name : public Error {                                          \
    public:                                                               \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

GAPDYN_DEFINE_ERROR(InvalidConfig);
GAPDYN_DEFINE_ERROR(EmptyRange);
GAPDYN_DEFINE_ERROR(BadHeader);
GAPDYN_DEFINE_ERROR(NonMonotonicTime);
GAPDYN_DEFINE_ERROR(BadNumber);
GAPDYN_DEFINE_ERROR(DegenerateStation);
GAPDYN_DEFINE_ERROR(SpaceMismatch);
GAPDYN_DEFINE_ERROR(Unsatisfiable);
GAPDYN_DEFINE_ERROR(NoObservedData);
GAPDYN_DEFINE_ERROR(SvdFailure);
GAPDYN_DEFINE_ERROR(RankDeficient);
GAPDYN_DEFINE_ERROR(InsufficientPairs);
GAPDYN_DEFINE_ERROR(ShapeMismatch);
GAPDYN_DEFINE_ERROR(TruthMissing);
GAPDYN_DEFINE_ERROR(DegenerateObserved);

#undef GAPDYN_DEFINE_ERROR

} // namespace gapdyn
