#pragma once

namespace ionlab {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kCsvSchemaVersion = 1;
inline constexpr int kConfigSchemaVersion = 1;

// Pinned stream-generator identity, recorded in every output's metadata.
inline constexpr const char* kRngAlgorithm = "philox4x32-10/v1";

}  // namespace ionlab
