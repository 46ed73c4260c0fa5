// Copyright 2026 The FlowDyn Authors
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

#include "flowdyn/binary_io.h"

#include <bit>
#include <cstring>

#include "flowdyn/error.h"

namespace flowdyn {

std::string TagName(uint32_t tag) {
  std::string s(4, ' ');
  for (int i = 0; i < 4; ++i) {
    const char c = static_cast<char>((tag >> (8 * i)) & 0xff);
    s[i] = (c >= 32 && c < 127) ? c : '?';
  }
  return s;
}

void BinaryWriter::U32(uint32_t v) {
  for (int i = 0; i < 4; ++i) buffer_.push_back(static_cast<char>(v >> (8 * i)));
}

void BinaryWriter::U64(uint64_t v) {
  for (int i = 0; i < 8; ++i) buffer_.push_back(static_cast<char>(v >> (8 * i)));
}

void BinaryWriter::F64(double v) { U64(std::bit_cast<uint64_t>(v)); }

void BinaryWriter::F64s(std::span<const double> values) {
  for (double v : values) F64(v);
}

void BinaryReader::Need(size_t n) {
  if (remaining() < n) {
    ThrowDataError(context_ + ": truncated (needed " + std::to_string(n) +
                   " bytes, " + std::to_string(remaining()) + " left)");
  }
}

uint32_t BinaryReader::U32() {
  Need(4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<uint32_t>(static_cast<unsigned char>(data_[pos_ + i]))
         << (8 * i);
  }
  pos_ += 4;
  return v;
}

uint64_t BinaryReader::U64() {
  Need(8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(data_[pos_ + i]))
         << (8 * i);
  }
  pos_ += 8;
  return v;
}

double BinaryReader::F64() { return std::bit_cast<double>(U64()); }

void BinaryReader::F64s(std::span<double> out) {
  Need(out.size() * 8);
  for (double& v : out) v = F64();
}

std::string_view BinaryReader::Bytes(size_t n) {
  Need(n);
  std::string_view s = data_.substr(pos_, n);
  pos_ += n;
  return s;
}

uint64_t BinaryReader::Count(size_t bytes_per_item) {
  const uint64_t n = U64();
  if (bytes_per_item > 0 && n > remaining() / bytes_per_item) {
    ThrowDataError(context_ + ": truncated (count " + std::to_string(n) +
                   " exceeds remaining payload)");
  }
  return n;
}

std::string EncodeContainer(uint32_t magic, std::span<const Record> records) {
  BinaryWriter w;
  w.U32(magic);
  w.U32(kContainerVersion);
  for (const Record& r : records) {
    w.U32(r.tag);
    w.U64(r.payload.size());
    w.Bytes(r.payload);
  }
  return w.Take();
}

std::vector<Record> DecodeContainer(std::string_view bytes, uint32_t magic,
                                    const std::string& context) {
  if (bytes.size() < 4) ThrowDataError(context + ": truncated header");
  BinaryReader r(bytes, context);
  const uint32_t got = r.U32();
  if (got != magic) {
    ThrowDataError(context + ": bad magic '" + TagName(got) + "', expected '" +
                   TagName(magic) + "'");
  }
  const uint32_t version = r.U32();
  if (version != kContainerVersion) {
    ThrowDataError(context + ": unsupported version " +
                   std::to_string(version) + " (expected " +
                   std::to_string(kContainerVersion) + ")");
  }
  std::vector<Record> records;
  while (!r.AtEnd()) {
    Record rec;
    rec.tag = r.U32();
    const uint64_t size = r.Count(1);
    rec.payload = std::string(r.Bytes(size));
    records.push_back(std::move(rec));
  }
  return records;
}

std::optional<std::string_view> FindRecord(std::span<const Record> records,
                                           uint32_t tag) {
  for (const Record& r : records) {
    if (r.tag == tag) return std::string_view(r.payload);
  }
  return std::nullopt;
}

}  // namespace flowdyn
