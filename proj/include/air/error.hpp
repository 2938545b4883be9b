#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace air {

// A caller broke an operation's precondition: shape mismatch, masked action,
// empty batch, malformed episode.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// A computation produced NaN or Inf.
class NumericFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed external input: checkpoint bytes, spec files, configs.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An enumeration would exceed its record budget.
class BudgetExceeded : public std::runtime_error {
public:
    BudgetExceeded(const std::string& what, std::uint64_t required, std::uint64_t budget)
        : std::runtime_error(what), required_(required), budget_(budget) {}

    std::uint64_t required() const noexcept { return required_; }
    std::uint64_t budget() const noexcept { return budget_; }

private:
    std::uint64_t required_;
    std::uint64_t budget_;
};

}  // namespace air
