#include "nllvm/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace nllvm {

namespace {

std::atomic<std::size_t> g_count{ 0 };
std::atomic<bool> g_quiet{ false };
std::mutex g_mutex;

} // namespace

void warn(std::string_view message)
{
  ++g_count;
  if (g_quiet)
    return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "nllvm warning: " << message << '\n';
}

std::size_t warning_count() noexcept
{
  return g_count;
}

void set_warnings_quiet(bool quiet) noexcept
{
  g_quiet = quiet;
}

} // namespace nllvm
