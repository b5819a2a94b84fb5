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

#include "encode/store.h"

#include <algorithm>
#include <bit>
#include <string>
#include <utility>

#include "encode/errors.h"

namespace encode {
namespace {

constexpr std::size_t kRecordFixed = 8 + 2 + 8;

}  // namespace

std::vector<std::uint8_t> serialize_store(std::span<const InterestSet> sets, const Digest& config_hash) {
  if (sets.empty()) throw EmptyInputError("no interest sets to store");
  const std::size_t d = sets.front().dim();
  std::vector<const InterestSet*> order;
  std::size_t k_max = 0;
  for (const InterestSet& s : sets) {
    if (s.interests.empty()) throw EmptyInputError("user " + std::to_string(s.user_id) + " has no interests");
    if (s.interests.size() > 0xFFFF) throw ConfigError("too many interests for one record");
    for (const Vec& u : s.interests) {
      if (u.size() != d || d == 0) throw DimError("inconsistent interest dims");
    }
    k_max = std::max(k_max, s.interests.size());
    order.push_back(&s);
  }
  std::sort(order.begin(), order.end(),
            [](const InterestSet* a, const InterestSet* b) { return a->user_id < b->user_id; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->user_id == order[i - 1]->user_id) {
      throw DuplicateKeyError("duplicate user " + std::to_string(order[i]->user_id));
    }
  }

  ByteWriter w;
  w.put_magic("ENCS");
  w.put_u16(kStoreVersion);
  w.put_u32(static_cast<std::uint32_t>(d));
  w.put_u32(static_cast<std::uint32_t>(k_max));
  w.put_bytes(config_hash);
  w.put_u64(order.size());
  const std::size_t index_at = w.size();
  for (const InterestSet* s : order) {
    w.put_u64(s->user_id);
    w.put_u64(0);
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    w.patch_u64(index_at + i * kStoreIndexEntrySize + 8, w.size());
    const InterestSet& s = *order[i];
    w.put_u64(s.user_id);
    w.put_u16(static_cast<std::uint16_t>(s.interests.size()));
    for (const Vec& u : s.interests) {
      for (double v : u) w.put_f32(static_cast<float>(v));
    }
    w.put_i64(s.created_at);
  }
  const std::uint32_t crc = crc32(w.bytes());
  w.put_u32(crc);
  return w.take();
}

void write_store(const std::filesystem::path& path, std::span<const InterestSet> sets, const Digest& config_hash) {
  write_file_atomic(path, serialize_store(sets, config_hash));
}

std::shared_ptr<const Snapshot> Snapshot::open(const std::filesystem::path& path) {
  return from_bytes(read_file(path));
}

std::shared_ptr<const Snapshot> Snapshot::from_bytes(std::vector<std::uint8_t> bytes) {
  std::shared_ptr<Snapshot> snap(new Snapshot());
  snap->bytes_ = std::move(bytes);
  const std::span<const std::uint8_t> all = snap->bytes_;
  if (all.size() < kStoreHeaderSize + 4) throw CorruptStoreError("store: file too short");
  ByteReader r(all, "store");
  if (!r.expect_magic("ENCS")) throw CorruptStoreError("store: bad magic");
  const std::uint16_t version = r.get_u16();
  if (version != kStoreVersion) throw VersionError("store version " + std::to_string(version) + " unsupported");
  const std::size_t body = all.size() - 4;
  ByteReader tail(all.subspan(body), "store CRC");
  if (tail.get_u32() != crc32(all.subspan(0, body))) throw CorruptStoreError("store: CRC mismatch");

  snap->dim_ = r.get_u32();
  snap->k_max_ = r.get_u32();
  const auto hash = r.get_bytes(32);
  std::copy(hash.begin(), hash.end(), snap->config_hash_.begin());
  const std::uint64_t count = r.get_u64();
  if (snap->dim_ == 0 || snap->k_max_ == 0) throw CorruptStoreError("store: bad shape");
  if (count > (body - kStoreHeaderSize) / kStoreIndexEntrySize) throw CorruptStoreError("store: bad record count");
  snap->index_.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t user = r.get_u64();
    const std::uint64_t offset = r.get_u64();
    if (!snap->index_.empty() && user <= snap->index_.back().user_id) {
      throw CorruptStoreError("store: index not sorted");
    }
    snap->index_.push_back({user, offset});
  }
  // Records must tile the region between the index and the CRC.
  std::size_t expected = r.position();
  for (const Entry& e : snap->index_) {
    if (e.offset != expected || e.offset + kRecordFixed > body) throw CorruptStoreError("store: bad record offset");
    ByteReader rec(all.subspan(0, body), "store record");
    rec.seek(e.offset);
    if (rec.get_u64() != e.user_id) throw CorruptStoreError("store: record does not match index");
    const std::size_t k = rec.get_u16();
    if (k == 0 || k > snap->k_max_) throw CorruptStoreError("store: bad interest count");
    expected = e.offset + kRecordFixed + k * snap->dim_ * 4;
    if (expected > body) throw CorruptStoreError("store: record past end");
  }
  if (expected != body) throw CorruptStoreError("store: trailing bytes");
  return snap;
}

std::vector<std::uint64_t> Snapshot::user_ids() const {
  std::vector<std::uint64_t> out;
  out.reserve(index_.size());
  for (const Entry& e : index_) out.push_back(e.user_id);
  return out;
}

InterestSet Snapshot::decode(const Entry& entry) const {
  ByteReader r(bytes_, "store record");
  r.seek(entry.offset);
  InterestSet set{.user_id = r.get_u64(), .config_hash = config_hash_};
  const std::size_t k = r.get_u16();
  set.interests.assign(k, Vec(dim_));
  for (Vec& u : set.interests) {
    for (double& v : u) v = static_cast<double>(r.get_f32());
  }
  set.created_at = r.get_i64();
  return set;
}

std::optional<InterestSet> Snapshot::find(std::uint64_t user_id) const {
  const auto it = std::lower_bound(index_.begin(), index_.end(), user_id,
                                   [](const Entry& e, std::uint64_t id) { return e.user_id < id; });
  if (it == index_.end() || it->user_id != user_id) return std::nullopt;
  return decode(*it);
}

InterestSet Snapshot::lookup(std::uint64_t user_id) const {
  std::optional<InterestSet> set = find(user_id);
  if (!set) throw NotFoundError("user " + std::to_string(user_id) + " not in store");
  return std::move(*set);
}

SnapshotHolder::SnapshotHolder(std::shared_ptr<const Snapshot> initial) : current_{std::move(initial), 1} {
  if (!current_.snapshot) throw ConfigError("snapshot holder needs an initial snapshot");
}

SnapshotHolder::Versioned SnapshotHolder::current() const {
  std::lock_guard lock(mu_);
  return current_;
}

std::uint64_t SnapshotHolder::swap(const std::filesystem::path& path) { return swap(Snapshot::open(path)); }

std::uint64_t SnapshotHolder::swap(std::shared_ptr<const Snapshot> next) {
  if (!next) throw ConfigError("cannot swap in an empty snapshot");
  std::shared_ptr<const Snapshot> old;
  std::lock_guard lock(mu_);
  old = std::exchange(current_.snapshot, std::move(next));
  return ++current_.generation;
}

}  // namespace encode
