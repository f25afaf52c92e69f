#pragma once
// Packed genotype matrices and the GWDL on-disk format.
//
// Dosages are alternate-allele counts coded in two bits:
//   00 -> 0, 01 -> 1, 10 -> 2, 11 -> missing
// Four samples per byte, first sample in the lowest bits. Storage is
// SNP-major; every SNP column starts on a byte boundary and occupies
// ceil(N / 4) bytes with zero padding in the final byte.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dlgwas/error.hpp"
#include "dlgwas/io.hpp"

namespace dlgwas {

inline constexpr uint8_t kMissing = 3;
inline constexpr uint32_t kGwdlVersion = 1;
inline constexpr char kGwdlMagic[4] = {'G', 'W', 'D', 'L'};

inline std::size_t packed_bytes(std::size_t n_codes) { return (n_codes + 3) / 4; }

inline std::vector<uint8_t> pack_genotypes(std::span<const uint8_t> codes) {
  std::vector<uint8_t> packed(packed_bytes(codes.size()), 0);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] > kMissing) {
      throw EncodingError("genotype code " + std::to_string(int{codes[i]}) + " at position " +
                          std::to_string(i) + " is outside {0,1,2,MISSING}");
    }
    packed[i / 4] |= static_cast<uint8_t>(codes[i] << (2 * (i % 4)));
  }
  return packed;
}

inline std::vector<uint8_t> unpack_genotypes(std::span<const uint8_t> packed, std::size_t n_codes) {
  if (packed.size() < packed_bytes(n_codes)) throw TruncatedError("packed block shorter than code count");
  std::vector<uint8_t> codes(n_codes);
  for (std::size_t i = 0; i < n_codes; ++i) codes[i] = (packed[i / 4] >> (2 * (i % 4))) & 0x3;
  return codes;
}

inline std::vector<std::string> numbered_ids(std::string_view prefix, std::size_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::string(prefix) + std::to_string(i));
  return ids;
}

class GenotypeMatrix {
 public:
  GenotypeMatrix() = default;

  // `packed` holds n_snps columns of packed_bytes(n_samples) bytes each.
  GenotypeMatrix(std::size_t n_samples, std::size_t n_snps, std::vector<uint8_t> packed,
                 std::vector<std::string> snp_ids, std::vector<std::string> sample_ids)
      : n_samples_(n_samples),
        n_snps_(n_snps),
        data_(std::move(packed)),
        snp_ids_(std::move(snp_ids)),
        sample_ids_(std::move(sample_ids)) {
    if (data_.size() != n_snps_ * bytes_per_snp()) {
      throw DimensionMismatchError("packed payload has " + std::to_string(data_.size()) + " bytes, expected " +
                                   std::to_string(n_snps_ * bytes_per_snp()));
    }
    if (snp_ids_.size() != n_snps_ || sample_ids_.size() != n_samples_) {
      throw DimensionMismatchError("identifier tables do not match matrix dimensions");
    }
    require_unique(snp_ids_, "snp");
    require_unique(sample_ids_, "sample");
    const unsigned tail = n_samples_ % 4;
    if (tail != 0) {
      const auto pad_mask = static_cast<uint8_t>(0xFF << (2 * tail));
      for (std::size_t j = 0; j < n_snps_; ++j) {
        if (data_[(j + 1) * bytes_per_snp() - 1] & pad_mask) {
          throw ParseError("nonzero padding bits in column " + std::to_string(j));
        }
      }
    }
  }

  // `codes` is SNP-major: codes[snp * n_samples + sample].
  static GenotypeMatrix from_codes(std::size_t n_samples, std::size_t n_snps, std::span<const uint8_t> codes,
                                   std::vector<std::string> snp_ids, std::vector<std::string> sample_ids) {
    if (codes.size() != n_samples * n_snps) throw DimensionMismatchError("code count != N*M");
    std::vector<uint8_t> packed;
    packed.reserve(n_snps * packed_bytes(n_samples));
    for (std::size_t j = 0; j < n_snps; ++j) {
      auto col = pack_genotypes(codes.subspan(j * n_samples, n_samples));
      packed.insert(packed.end(), col.begin(), col.end());
    }
    return GenotypeMatrix(n_samples, n_snps, std::move(packed), std::move(snp_ids), std::move(sample_ids));
  }

  static GenotypeMatrix from_codes(std::size_t n_samples, std::size_t n_snps, std::span<const uint8_t> codes) {
    return from_codes(n_samples, n_snps, codes, numbered_ids("snp", n_snps), numbered_ids("s", n_samples));
  }

  std::size_t n_samples() const { return n_samples_; }
  std::size_t n_snps() const { return n_snps_; }
  std::size_t bytes_per_snp() const { return packed_bytes(n_samples_); }
  const std::vector<uint8_t>& data() const { return data_; }
  const std::vector<std::string>& snp_ids() const { return snp_ids_; }
  const std::vector<std::string>& sample_ids() const { return sample_ids_; }

  std::span<const uint8_t> packed_column(std::size_t snp) const {
    return std::span<const uint8_t>(data_).subspan(snp * bytes_per_snp(), bytes_per_snp());
  }

  uint8_t code(std::size_t sample, std::size_t snp) const {
    return (data_[snp * bytes_per_snp() + sample / 4] >> (2 * (sample % 4))) & 0x3;
  }

  std::vector<uint8_t> column(std::size_t snp) const { return unpack_genotypes(packed_column(snp), n_samples_); }

  GenotypeMatrix select_snps(std::span<const std::size_t> indices) const {
    std::vector<uint8_t> packed;
    packed.reserve(indices.size() * bytes_per_snp());
    std::vector<std::string> ids;
    ids.reserve(indices.size());
    for (auto j : indices) {
      auto col = packed_column(j);
      packed.insert(packed.end(), col.begin(), col.end());
      ids.push_back(snp_ids_[j]);
    }
    return GenotypeMatrix(n_samples_, indices.size(), std::move(packed), std::move(ids), sample_ids_);
  }

  bool operator==(const GenotypeMatrix&) const = default;

 private:
  static void require_unique(const std::vector<std::string>& ids, std::string_view what) {
    std::unordered_set<std::string_view> seen;
    seen.reserve(ids.size());
    for (const auto& id : ids) {
      if (!seen.insert(id).second) throw DataError("duplicate " + std::string(what) + " id '" + id + "'");
    }
  }

  std::size_t n_samples_ = 0;
  std::size_t n_snps_ = 0;
  std::vector<uint8_t> data_;
  std::vector<std::string> snp_ids_;
  std::vector<std::string> sample_ids_;
};

// --- GWDL format ----------------------------------------------------------
// magic "GWDL" | version u32 | N u64 | M u64 | M snp ids | N sample ids |
// payload (M * ceil(N/4) bytes). Ids are u32-length-prefixed UTF-8.

inline std::string encode_gwdl(const GenotypeMatrix& m) {
  io::ByteWriter w;
  w.put_bytes(kGwdlMagic, 4);
  w.put<uint32_t>(kGwdlVersion);
  w.put<uint64_t>(m.n_samples());
  w.put<uint64_t>(m.n_snps());
  for (const auto& id : m.snp_ids()) w.put_string(id);
  for (const auto& id : m.sample_ids()) w.put_string(id);
  w.put_bytes(m.data().data(), m.data().size());
  return w.bytes();
}

inline GenotypeMatrix decode_gwdl(std::string_view bytes, const std::string& context = "GWDL") {
  io::ByteReader r(bytes, context);
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kGwdlMagic, 4)) {
    throw BadMagicError(context + ": bad magic bytes (not a GWDL file)");
  }
  r.get_bytes(4);
  const auto version = r.get<uint32_t>();
  if (version != kGwdlVersion) throw VersionError(context + ": unsupported GWDL version " + std::to_string(version));
  const auto n = r.get<uint64_t>();
  const auto m = r.get<uint64_t>();
  // Each id costs at least its 4-byte length prefix.
  if (m > r.remaining() / 4 || n > r.remaining() / 4) {
    throw TruncatedError(context + ": header claims " + std::to_string(n) + "x" + std::to_string(m) +
                         " which exceeds the file size");
  }
  std::vector<std::string> snp_ids(m);
  for (auto& id : snp_ids) id = r.get_string();
  std::vector<std::string> sample_ids(n);
  for (auto& id : sample_ids) id = r.get_string();
  const std::size_t payload = m * packed_bytes(n);
  if (m != 0 && payload / m != packed_bytes(n)) throw DimensionMismatchError(context + ": dimensions overflow");
  if (payload > r.remaining()) {
    throw TruncatedError(context + ": payload needs " + std::to_string(payload) + " bytes, file has " +
                         std::to_string(r.remaining()));
  }
  auto raw = r.get_bytes(payload);
  if (r.remaining() != 0) {
    throw DimensionMismatchError(context + ": " + std::to_string(r.remaining()) +
                                 " trailing bytes after payload; header dimensions disagree with file");
  }
  return GenotypeMatrix(n, m, std::vector<uint8_t>(raw.begin(), raw.end()), std::move(snp_ids),
                        std::move(sample_ids));
}

inline void save_matrix(const GenotypeMatrix& m, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_gwdl(m));
}

inline GenotypeMatrix load_matrix(const std::filesystem::path& path) {
  return decode_gwdl(io::read_file(path), path.string());
}

// --- variant statistics ---------------------------------------------------

struct SnpStats {
  double dosage_mean = 0.0;
  double minor_allele_freq = 0.0;
  double call_rate = 0.0;
};

inline SnpStats snp_stats(const GenotypeMatrix& m, std::size_t snp) {
  if (snp >= m.n_snps()) throw DataError("snp index " + std::to_string(snp) + " out of range");
  std::size_t observed = 0;
  std::size_t alt = 0;
  for (auto c : m.column(snp)) {
    if (c == kMissing) continue;
    ++observed;
    alt += c;
  }
  if (observed == 0) throw StatsError("SNP '" + m.snp_ids()[snp] + "' has no observed genotypes");
  SnpStats s;
  s.dosage_mean = static_cast<double>(alt) / static_cast<double>(observed);
  const double f = s.dosage_mean / 2.0;
  s.minor_allele_freq = std::min(f, 1.0 - f);
  s.call_rate = static_cast<double>(observed) / static_cast<double>(m.n_samples());
  return s;
}

struct FilterResult {
  GenotypeMatrix matrix;
  std::vector<std::size_t> kept;
};

// Keeps SNPs with MAF >= maf_min and call rate >= call_rate_min, in their
// original order. All-missing SNPs are always dropped.
inline FilterResult filter_variants(const GenotypeMatrix& m, double maf_min, double call_rate_min) {
  if (!(maf_min >= 0.0 && maf_min <= 1.0) || !(call_rate_min >= 0.0 && call_rate_min <= 1.0)) {
    throw ConfigError("filter thresholds must lie in [0,1]");
  }
  FilterResult out;
  for (std::size_t j = 0; j < m.n_snps(); ++j) {
    SnpStats s;
    try {
      s = snp_stats(m, j);
    } catch (const StatsError&) {
      continue;
    }
    if (s.minor_allele_freq >= maf_min && s.call_rate >= call_rate_min) out.kept.push_back(j);
  }
  if (out.kept.empty()) throw EmptyResultError("no variants pass MAF/call-rate filters");
  out.matrix = m.select_snps(out.kept);
  return out;
}

// Dense N x M dosage matrix (samples in rows) with missing entries replaced
// by the SNP's observed mean.
inline Eigen::MatrixXd impute_to_mean(const GenotypeMatrix& m) {
  const std::size_t n = m.n_samples();
  Eigen::MatrixXd dense(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m.n_snps()));
  std::vector<uint8_t> col;
  for (std::size_t j = 0; j < m.n_snps(); ++j) {
    col = m.column(j);
    std::size_t observed = 0;
    std::size_t alt = 0;
    for (auto c : col) {
      if (c != kMissing) {
        ++observed;
        alt += c;
      }
    }
    if (observed == 0) throw StatsError("cannot impute all-missing SNP '" + m.snp_ids()[j] + "'");
    const double mean = static_cast<double>(alt) / static_cast<double>(observed);
    auto out = dense.col(static_cast<Eigen::Index>(j));
    for (std::size_t i = 0; i < n; ++i) {
      out(static_cast<Eigen::Index>(i)) = col[i] == kMissing ? mean : static_cast<double>(col[i]);
    }
  }
  return dense;
}

}  // namespace dlgwas
