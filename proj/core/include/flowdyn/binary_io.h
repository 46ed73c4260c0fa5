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

// Little-endian binary container shared by datasets, static tables and
// model files:
//
//   magic[4] | u32 version | record*
//   record  := u32 tag | u64 payload_bytes | payload
//
// Payloads are built from u32/u64 counts and little-endian IEEE-754 doubles.
// Dataset and table files use magic "FDYN"; network files use "FMNN".

#ifndef FLOWDYN_BINARY_IO_H_
#define FLOWDYN_BINARY_IO_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flowdyn {

constexpr uint32_t kContainerVersion = 1;

constexpr uint32_t FourCC(const char (&s)[5]) {
  return static_cast<uint32_t>(static_cast<unsigned char>(s[0])) |
         static_cast<uint32_t>(static_cast<unsigned char>(s[1])) << 8 |
         static_cast<uint32_t>(static_cast<unsigned char>(s[2])) << 16 |
         static_cast<uint32_t>(static_cast<unsigned char>(s[3])) << 24;
}

constexpr uint32_t kDataMagic = FourCC("FDYN");
constexpr uint32_t kModelMagic = FourCC("FMNN");

constexpr uint32_t kTagDataset = FourCC("DSET");
constexpr uint32_t kTagStaticTable = FourCC("STBL");
constexpr uint32_t kTagRodParams = FourCC("PRMS");
constexpr uint32_t kTagNetwork = FourCC("NETW");
constexpr uint32_t kTagScaler = FourCC("SCLR");
constexpr uint32_t kTagManifest = FourCC("MNFT");
constexpr uint32_t kTagSurrogate = FourCC("SURR");

std::string TagName(uint32_t tag);

class BinaryWriter {
 public:
  void U32(uint32_t v);
  void U64(uint64_t v);
  void F64(double v);
  void F64s(std::span<const double> values);
  void Bytes(std::string_view bytes) { buffer_.append(bytes); }

  const std::string& data() const { return buffer_; }
  std::string Take() { return std::move(buffer_); }

 private:
  std::string buffer_;
};

// Every read past the end throws kDataError mentioning "truncated".
class BinaryReader {
 public:
  BinaryReader(std::string_view data, std::string context)
      : data_(data), context_(std::move(context)) {}

  uint32_t U32();
  uint64_t U64();
  double F64();
  void F64s(std::span<double> out);
  std::string_view Bytes(size_t n);

  // Reads a count and rejects it if the remaining bytes cannot hold
  // count * bytes_per_item.
  uint64_t Count(size_t bytes_per_item);

  size_t remaining() const { return data_.size() - pos_; }
  bool AtEnd() const { return pos_ == data_.size(); }

 private:
  void Need(size_t n);

  std::string_view data_;
  size_t pos_ = 0;
  std::string context_;
};

struct Record {
  uint32_t tag = 0;
  std::string payload;
};

std::string EncodeContainer(uint32_t magic, std::span<const Record> records);

// Throws kDataError with "bad magic", "unsupported version" or "truncated".
std::vector<Record> DecodeContainer(std::string_view bytes, uint32_t magic,
                                    const std::string& context);

// First record with the tag, if any.
std::optional<std::string_view> FindRecord(std::span<const Record> records,
                                           uint32_t tag);

}  // namespace flowdyn

#endif  // FLOWDYN_BINARY_IO_H_
