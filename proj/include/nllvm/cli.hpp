#pragma once

#include "nllvm/slope_fit.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nllvm {

/// One numeric column, optional header "y". Throws IoError when the file
/// cannot be read, ParseError (with the 1-based line) on a non-numeric or
/// non-finite row and EmptyDataError when no values remain.
std::vector<double> load_csv(const std::filesystem::path& path);

//! Writes a table as CSV with a header row.
void write_csv(const std::filesystem::path& path, const Table& table);

inline constexpr std::size_t kMinGridN = 64;
inline constexpr std::size_t kMaxGridN = 65536;

struct RunConfig
{
  //! estimate, vi, verify or contract.
  std::string command;
  //! Check name for verify.
  std::string check;
  std::optional<std::filesystem::path> input_path;
  std::size_t grid_n = 1024;
  std::uint64_t seed = 0;
  std::filesystem::path output_path;
  //! Command flags by long name, as given or defaulted.
  std::map<std::string, std::string> params;

  //! ParameterError unless the grid size and command are valid.
  void validate() const;
  nlohmann::json to_json() const;
};

struct Artifact
{
  std::string file;
  std::vector<std::string> columns;

  bool operator==(const Artifact&) const = default;
};

struct Report
{
  std::string schema_version = "1";
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, double> metrics;
  std::optional<bool> pass;
  std::int64_t runtime_ms = 0;
  std::uint64_t seed = 0;
  //! CSV sidecars by name, relative to the report.
  std::map<std::string, Artifact> artifacts;
  std::optional<std::string> error;

  bool operator==(const Report&) const;
};

//! Keys sorted; non-finite metrics become null.
nlohmann::json to_json(const Report& report);
//! Inverse of to_json; null metrics read back as NaN.
Report report_from_json(const nlohmann::json& j);

//! Sidecar path <dir>/<stem>.<name>.csv for a report path.
std::filesystem::path sidecar_path(const std::filesystem::path& report_path, const std::string& name);

/// Runs the command, writes the JSON report and its CSV sidecars and
/// returns the report. Library errors raised by the experiment are caught
/// and reported with pass = false.
Report dispatch(const RunConfig& cfg);

//! Check names accepted by `verify`.
const std::vector<std::string>& check_names();

/// Full command-line entry point. Returns 0 on success, 1 when the report
/// has pass = false and 2 on usage errors.
int run_cli(int argc, const char* const* argv);

} // namespace nllvm
