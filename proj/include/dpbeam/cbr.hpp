// Copyright 2026 The dpbeamsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Compressed beamforming report payload.
//
// Wire format: for each angle-carrying column i = 1..min(n_s, n_t-1), the
// n_t-i phase indices (b_phi bits each) followed by the n_t-i mixing indices
// (b_psi bits each). Fields are written most-significant bit first into a
// contiguous bit stream, bytes filled from bit 7 down to bit 0. The stream is
// zero-padded to a whole byte. A frame file is a sequence of records, each a
// 4-byte little-endian payload length followed by the payload.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dpbeam/common.hpp"
#include "dpbeam/dpq.hpp"
#include "dpbeam/givens.hpp"

namespace dpbeam {

struct CbrFrame {
  std::size_t n_t = 0;
  std::size_t n_s = 0;
  unsigned b_phi = 0;
  unsigned b_psi = 0;
  std::vector<std::uint32_t> phi_indices;
  std::vector<std::uint32_t> psi_indices;
  std::vector<std::uint8_t> payload;
};

inline std::size_t cbr_payload_bits(std::size_t n_t, std::size_t n_s, unsigned b_phi, unsigned b_psi) {
  return angle_count(n_t, n_s) * (b_phi + b_psi);
}

inline std::size_t cbr_payload_bytes(std::size_t n_t, std::size_t n_s, unsigned b_phi, unsigned b_psi) {
  return (cbr_payload_bits(n_t, n_s, b_phi, b_psi) + 7) / 8;
}

namespace detail {

class BitWriter {
 public:
  explicit BitWriter(std::size_t bytes) : buf_(bytes, 0) {}
  void put(std::uint32_t value, unsigned width) {
    for (unsigned b = width; b-- > 0;) {
      if ((value >> b) & 1U) buf_[pos_ / 8] |= static_cast<std::uint8_t>(0x80U >> (pos_ % 8));
      ++pos_;
    }
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> data) : data_(data) {}
  std::uint32_t get(unsigned width) {
    std::uint32_t v = 0;
    for (unsigned b = 0; b < width; ++b) {
      v = (v << 1) | ((data_[pos_ / 8] >> (7 - pos_ % 8)) & 1U);
      ++pos_;
    }
    return v;
  }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline void check_shape(std::size_t n_t, std::size_t n_s, unsigned b_phi, unsigned b_psi) {
  if (n_t == 0 || n_s == 0 || n_s > n_t) throw InvalidInput("cbr: invalid shape");
  if (b_phi == 0 || b_phi > 16 || b_psi == 0 || b_psi > 16) throw InvalidInput("cbr: bit width must be in [1, 16]");
}

}  // namespace detail

inline std::vector<std::uint8_t> cbr_encode(std::span<const std::uint32_t> phi_indices,
                                            std::span<const std::uint32_t> psi_indices, std::size_t n_t,
                                            std::size_t n_s, unsigned b_phi, unsigned b_psi) {
  detail::check_shape(n_t, n_s, b_phi, b_psi);
  const std::size_t n = angle_count(n_t, n_s);
  if (phi_indices.size() != n || psi_indices.size() != n)
    throw InvalidInput("cbr_encode: index count does not match shape");
  for (auto v : phi_indices)
    if (v >> b_phi) throw InvalidInput("cbr_encode: phase index out of range");
  for (auto v : psi_indices)
    if (v >> b_psi) throw InvalidInput("cbr_encode: mixing index out of range");

  detail::BitWriter w(cbr_payload_bytes(n_t, n_s, b_phi, b_psi));
  std::size_t base = 0;
  for (std::size_t i = 1; i <= angle_columns(n_t, n_s); ++i) {
    const std::size_t per_col = n_t - i;
    for (std::size_t j = 0; j < per_col; ++j) w.put(phi_indices[base + j], b_phi);
    for (std::size_t j = 0; j < per_col; ++j) w.put(psi_indices[base + j], b_psi);
    base += per_col;
  }
  return w.take();
}

inline CbrFrame cbr_encode(const AngleIndices& idx, unsigned b_phi, unsigned b_psi) {
  CbrFrame f{idx.n_t, idx.n_s, b_phi, b_psi, idx.phases, idx.mixings, {}};
  f.payload = cbr_encode(f.phi_indices, f.psi_indices, f.n_t, f.n_s, b_phi, b_psi);
  return f;
}

enum class PaddingMode { Strict, Lenient };

/// Decodes a payload. Bytes past the required length are ignored; pad bits
/// inside the last used byte must be zero unless `mode` is Lenient.
inline CbrFrame cbr_decode(std::span<const std::uint8_t> payload, std::size_t n_t, std::size_t n_s, unsigned b_phi,
                           unsigned b_psi, PaddingMode mode = PaddingMode::Strict) {
  detail::check_shape(n_t, n_s, b_phi, b_psi);
  const std::size_t need = cbr_payload_bytes(n_t, n_s, b_phi, b_psi);
  if (payload.size() < need)
    throw TruncationError("cbr_decode: payload has " + std::to_string(payload.size()) + " bytes, need " +
                          std::to_string(need));

  CbrFrame f{n_t, n_s, b_phi, b_psi, {}, {}, {}};
  const std::size_t n = angle_count(n_t, n_s);
  f.phi_indices.reserve(n);
  f.psi_indices.reserve(n);
  detail::BitReader r(payload.first(need));
  for (std::size_t i = 1; i <= angle_columns(n_t, n_s); ++i) {
    const std::size_t per_col = n_t - i;
    for (std::size_t j = 0; j < per_col; ++j) f.phi_indices.push_back(r.get(b_phi));
    for (std::size_t j = 0; j < per_col; ++j) f.psi_indices.push_back(r.get(b_psi));
  }
  const std::size_t pad = need * 8 - r.position();
  if (mode == PaddingMode::Strict && pad > 0 && r.get(static_cast<unsigned>(pad)) != 0)
    throw FormatError("cbr_decode: nonzero padding bits");
  f.payload.assign(payload.begin(), payload.begin() + static_cast<std::ptrdiff_t>(need));
  return f;
}

inline AngleIndices to_indices(const CbrFrame& f) { return {f.n_t, f.n_s, f.phi_indices, f.psi_indices}; }

// ---------------------------------------------------------------------------
// Frame files

inline void write_frame_record(std::ostream& os, std::span<const std::uint8_t> payload) {
  const auto len = static_cast<std::uint32_t>(payload.size());
  const char hdr[4] = {static_cast<char>(len & 0xFF), static_cast<char>((len >> 8) & 0xFF),
                       static_cast<char>((len >> 16) & 0xFF), static_cast<char>((len >> 24) & 0xFF)};
  os.write(hdr, 4);
  os.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!os) throw std::runtime_error("write_frame_record: write failed");
}

/// Reads length-prefixed payloads until end of stream.
inline std::vector<std::vector<std::uint8_t>> read_frame_records(std::istream& is) {
  std::vector<std::vector<std::uint8_t>> out;
  for (;;) {
    unsigned char hdr[4];
    is.read(reinterpret_cast<char*>(hdr), 4);
    if (is.gcount() == 0) break;
    if (is.gcount() != 4) throw TruncationError("read_frame_records: truncated length prefix");
    const std::uint32_t len = std::uint32_t{hdr[0]} | (std::uint32_t{hdr[1]} << 8) | (std::uint32_t{hdr[2]} << 16) |
                              (std::uint32_t{hdr[3]} << 24);
    std::vector<std::uint8_t> buf(len);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(len));
    if (static_cast<std::uint32_t>(is.gcount()) != len)
      throw TruncationError("read_frame_records: record " + std::to_string(out.size()) + " is truncated");
    out.push_back(std::move(buf));
  }
  return out;
}

}  // namespace dpbeam
