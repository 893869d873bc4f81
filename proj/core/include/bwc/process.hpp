// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

// Process boundary shared by all external backends (separation,
// transcription, summarization).
//
// A backend is a command template such as
//
//   python3 sepformer.py --input {input} --max-speakers {max_speakers} --out-dir {out_dir}
//
// The template is split on whitespace (single and double quotes group),
// placeholders are substituted per argument and the program is exec'd
// directly without a shell. Exit status 0 is success; any other status,
// a signal or a timeout is reported as a retryable backend failure.
namespace bwc::process {

struct Result {
  int exit_code = -1;
  bool timed_out = false;
  bool signaled = false;
  std::string stdout_text;
  std::string stderr_text;

  bool ok() const noexcept { return !timed_out && !signaled && exit_code == 0; }
};

std::vector<std::string> split_command(std::string_view command_template);

/// Substitutes {name} placeholders. Unknown placeholders are left as-is.
std::vector<std::string> expand(std::string_view command_template,
                                const std::map<std::string, std::string>& vars);

/// Runs argv[0] with the given arguments, killing the process group after
/// `timeout`. Throws Error(invalid_argument) for an empty argv.
Result run(const std::vector<std::string>& argv, std::chrono::milliseconds timeout);

/// Owns a fresh directory under the system temp path; removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view prefix = "bwc");
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  TempDir(TempDir&& other) noexcept;
  TempDir& operator=(TempDir&& other) noexcept;
  ~TempDir();

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace bwc::process
