// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bwc {

enum class Errc {
  invalid_argument,
  io,
  empty_dataset,
  silent_asset,
  backend_failure,
  backend_timeout,
  nothing_separated,
  unknown_stage,
  non_finite,
  degenerate_labels,
  no_dictionary,
  pairing,
  referential,
  conflict,
  nothing_applied,
  malformed_filter,
  store_unavailable,
  corrupt_data,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, bool retryable = false)
      : std::runtime_error(message), code_(code), retryable_(retryable) {}

  Errc code() const noexcept { return code_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  Errc code_;
  bool retryable_;
};

/// Identifies one chunk of one asset.
struct ChunkRef {
  std::string asset_id;
  std::size_t chunk_index = 0;

  friend bool operator==(const ChunkRef&, const ChunkRef&) = default;
  friend auto operator<=>(const ChunkRef&, const ChunkRef&) = default;
};

std::string to_string(const ChunkRef& ref);

/// A backend (separation, transcription, summarization) failed on a chunk.
/// Crashes and timeouts are retryable; the chunk is carried for quarantine.
class BackendError : public Error {
 public:
  BackendError(Errc code, ChunkRef chunk, const std::string& message)
      : Error(code, message + " [" + to_string(chunk) + "]", /*retryable=*/true),
        chunk_(std::move(chunk)) {}

  const ChunkRef& chunk() const noexcept { return chunk_; }

 private:
  ChunkRef chunk_;
};

}  // namespace bwc
