#pragma once

#include <cstddef>
#include <string_view>

namespace nllvm {

//! Writes a warning to stderr (unless silenced) and bumps a process-wide
//! counter. Thread safe.
void warn(std::string_view message);

std::size_t warning_count() noexcept;

//! Suppresses stderr output; the counter still advances.
void set_warnings_quiet(bool quiet) noexcept;

} // namespace nllvm
