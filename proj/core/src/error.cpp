// SPDX-License-Identifier: Apache-2.0
#include "bwc/error.hpp"

namespace bwc {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::io: return "io";
    case Errc::empty_dataset: return "empty_dataset";
    case Errc::silent_asset: return "silent_asset";
    case Errc::backend_failure: return "backend_failure";
    case Errc::backend_timeout: return "backend_timeout";
    case Errc::nothing_separated: return "nothing_separated";
    case Errc::unknown_stage: return "unknown_stage";
    case Errc::non_finite: return "non_finite";
    case Errc::degenerate_labels: return "degenerate_labels";
    case Errc::no_dictionary: return "no_dictionary";
    case Errc::pairing: return "pairing";
    case Errc::referential: return "referential";
    case Errc::conflict: return "conflict";
    case Errc::nothing_applied: return "nothing_applied";
    case Errc::malformed_filter: return "malformed_filter";
    case Errc::store_unavailable: return "store_unavailable";
    case Errc::corrupt_data: return "corrupt_data";
  }
  return "unknown";
}

std::string to_string(const ChunkRef& ref) {
  return ref.asset_id + "#" + std::to_string(ref.chunk_index);
}

}  // namespace bwc
