// Copyright 2026 The Encode Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Versioned single-file interest store: the offline job writes it, the
// online scorer opens immutable snapshots of it.

#ifndef ENCODE_STORE_H_
#define ENCODE_STORE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "encode/binary_io.h"
#include "encode/interest.h"

namespace encode {

inline constexpr std::uint16_t kStoreVersion = 1;
// magic, version, d, K-max, config hash, record count
inline constexpr std::size_t kStoreHeaderSize = 4 + 2 + 4 + 4 + 32 + 8;
inline constexpr std::size_t kStoreIndexEntrySize = 16;

// "ENCS" | u16 version | u32 d | u32 K-max | 32-byte config hash |
// u64 record count | index (u64 user id, u64 offset) sorted by user id |
// records (u64 user id | u16 K' | K' x d f32 | i64 created at) |
// u32 CRC32 of everything before it. Offsets are from the start of the file.
// Throws EmptyInputError on no sets, DimError on inconsistent dims,
// DuplicateKeyError on a repeated user id.
std::vector<std::uint8_t> serialize_store(std::span<const InterestSet> sets, const Digest& config_hash);

// Temp file, fsync, rename.
void write_store(const std::filesystem::path& path, std::span<const InterestSet> sets, const Digest& config_hash);

class Snapshot {
 public:
  // Validates magic, version, CRC, index order and every record extent.
  // Throws CorruptStoreError or VersionError (IoError if unreadable).
  static std::shared_ptr<const Snapshot> open(const std::filesystem::path& path);
  static std::shared_ptr<const Snapshot> from_bytes(std::vector<std::uint8_t> bytes);

  std::size_t size() const { return index_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t k_max() const { return k_max_; }
  const Digest& config_hash() const { return config_hash_; }
  std::vector<std::uint64_t> user_ids() const;

  // Binary search on the index. Returned sets carry no within weights.
  std::optional<InterestSet> find(std::uint64_t user_id) const;
  // Throws NotFoundError.
  InterestSet lookup(std::uint64_t user_id) const;

 private:
  Snapshot() = default;

  struct Entry {
    std::uint64_t user_id;
    std::uint64_t offset;
  };

  InterestSet decode(const Entry& entry) const;

  std::vector<std::uint8_t> bytes_;
  std::vector<Entry> index_;
  std::size_t dim_ = 0;
  std::size_t k_max_ = 0;
  Digest config_hash_{};
};

// The serving-side holder of the current snapshot. A request takes one
// snapshot reference up front and uses it throughout, so it never sees two
// versions; swapping never blocks on in-flight requests.
class SnapshotHolder {
 public:
  struct Versioned {
    std::shared_ptr<const Snapshot> snapshot;
    std::uint64_t generation = 0;
  };

  explicit SnapshotHolder(std::shared_ptr<const Snapshot> initial);

  Versioned current() const;

  // Opens and validates `path`, then publishes it. On failure the old
  // snapshot stays and the error propagates. Returns the new generation.
  std::uint64_t swap(const std::filesystem::path& path);
  std::uint64_t swap(std::shared_ptr<const Snapshot> next);

 private:
  mutable std::mutex mu_;
  Versioned current_;
};

}  // namespace encode

#endif  // ENCODE_STORE_H_
