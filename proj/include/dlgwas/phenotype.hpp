#pragma once
// Per-sample traits and covariates, read from and written to TSV with a
// header row. The `sample_id` column is required; the trait column name is
// configurable and every other column is a covariate.

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dlgwas/error.hpp"
#include "dlgwas/io.hpp"

namespace dlgwas {

enum class TraitKind { binary, continuous };

inline std::string to_string(TraitKind k) { return k == TraitKind::binary ? "binary" : "continuous"; }

struct PhenotypeTable {
  std::vector<std::string> sample_ids;
  std::vector<double> trait;
  TraitKind trait_kind = TraitKind::binary;
  std::vector<std::string> covariate_names;
  Eigen::MatrixXd covariates;  // N x C, rows aligned with sample_ids

  std::size_t size() const { return sample_ids.size(); }

  void validate() const {
    if (trait.size() != sample_ids.size()) throw DataError("trait length differs from sample count");
    if (static_cast<std::size_t>(covariates.rows()) != sample_ids.size() && covariates.size() != 0) {
      throw DataError("covariate rows differ from sample count");
    }
    if (static_cast<std::size_t>(covariates.cols()) != covariate_names.size()) {
      throw DataError("covariate columns differ from covariate names");
    }
    if (trait_kind == TraitKind::binary) {
      for (std::size_t i = 0; i < trait.size(); ++i) {
        if (trait[i] != 0.0 && trait[i] != 1.0) {
          throw DataError("binary trait for sample '" + sample_ids[i] + "' is not 0/1");
        }
      }
    }
  }

  // Reorders rows to follow `order` (sample ids); every id must be present.
  PhenotypeTable aligned_to(const std::vector<std::string>& order) const {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < sample_ids.size(); ++i) index.emplace(sample_ids[i], i);
    PhenotypeTable out;
    out.trait_kind = trait_kind;
    out.covariate_names = covariate_names;
    out.covariates.resize(static_cast<Eigen::Index>(order.size()), covariates.cols());
    for (std::size_t r = 0; r < order.size(); ++r) {
      auto it = index.find(order[r]);
      if (it == index.end()) throw DataError("sample '" + order[r] + "' missing from phenotype table");
      out.sample_ids.push_back(order[r]);
      out.trait.push_back(trait[it->second]);
      if (covariates.cols() > 0) {
        out.covariates.row(static_cast<Eigen::Index>(r)) = covariates.row(static_cast<Eigen::Index>(it->second));
      }
    }
    return out;
  }
};

inline bool looks_binary(const std::vector<double>& values) {
  for (double v : values) {
    if (v != 0.0 && v != 1.0) return false;
  }
  return true;
}

inline std::string write_phenotype_tsv(const PhenotypeTable& p, const std::string& trait_column = "trait") {
  std::ostringstream out;
  out << "sample_id\t" << trait_column;
  for (const auto& name : p.covariate_names) out << '\t' << name;
  out << '\n';
  for (std::size_t i = 0; i < p.size(); ++i) {
    out << p.sample_ids[i] << '\t' << io::format_double(p.trait[i]);
    for (Eigen::Index c = 0; c < p.covariates.cols(); ++c) {
      out << '\t' << io::format_double(p.covariates(static_cast<Eigen::Index>(i), c));
    }
    out << '\n';
  }
  return out.str();
}

// Parses a phenotype TSV. `kind` nullopt infers binary when all trait values
// are 0/1.
inline PhenotypeTable parse_phenotype_tsv(const std::string& text, const std::string& trait_column = "trait",
                                          std::optional<TraitKind> kind = std::nullopt,
                                          const std::string& context = "phenotypes") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(context + ": empty file");
  const auto header = io::split_tabs(line);
  std::ptrdiff_t id_col = -1;
  std::ptrdiff_t trait_col = -1;
  PhenotypeTable p;
  std::vector<std::size_t> cov_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "sample_id") {
      id_col = static_cast<std::ptrdiff_t>(c);
    } else if (header[c] == trait_column) {
      trait_col = static_cast<std::ptrdiff_t>(c);
    } else {
      cov_cols.push_back(c);
      p.covariate_names.push_back(header[c]);
    }
  }
  if (id_col < 0) throw ParseError(context + ": required column 'sample_id' missing");
  std::vector<std::vector<double>> cov_rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = io::split_tabs(line);
    if (fields.size() != header.size()) {
      throw ParseError(context + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                       " fields, header has " + std::to_string(header.size()));
    }
    p.sample_ids.push_back(fields[static_cast<std::size_t>(id_col)]);
    if (trait_col >= 0) {
      p.trait.push_back(io::parse_double(fields[static_cast<std::size_t>(trait_col)], context));
    }
    std::vector<double> row;
    for (auto c : cov_cols) row.push_back(io::parse_double(fields[c], context));
    cov_rows.push_back(std::move(row));
  }
  if (trait_col < 0) p.trait.assign(p.sample_ids.size(), std::numeric_limits<double>::quiet_NaN());
  p.covariates.resize(static_cast<Eigen::Index>(cov_rows.size()), static_cast<Eigen::Index>(cov_cols.size()));
  for (std::size_t r = 0; r < cov_rows.size(); ++r) {
    for (std::size_t c = 0; c < cov_cols.size(); ++c) {
      p.covariates(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cov_rows[r][c];
    }
  }
  if (trait_col >= 0) {
    p.trait_kind = kind.value_or(looks_binary(p.trait) ? TraitKind::binary : TraitKind::continuous);
  }
  p.validate();
  return p;
}

inline PhenotypeTable load_phenotypes(const std::filesystem::path& path, const std::string& trait_column = "trait",
                                      std::optional<TraitKind> kind = std::nullopt) {
  return parse_phenotype_tsv(io::read_file(path), trait_column, kind, path.string());
}

// Appends the covariate columns of `extra` (matched by sample id) to `p`.
inline void merge_covariates(PhenotypeTable& p, const PhenotypeTable& extra) {
  const auto aligned = extra.aligned_to(p.sample_ids);
  Eigen::MatrixXd merged(static_cast<Eigen::Index>(p.size()), p.covariates.cols() + aligned.covariates.cols());
  if (p.covariates.cols() > 0) merged.leftCols(p.covariates.cols()) = p.covariates;
  merged.rightCols(aligned.covariates.cols()) = aligned.covariates;
  p.covariates = std::move(merged);
  p.covariate_names.insert(p.covariate_names.end(), aligned.covariate_names.begin(), aligned.covariate_names.end());
  p.validate();
}

// Natural log of each sample's arithmetic mean over its measurements.
// Throws listing every sample with a non-positive value.
inline std::vector<double> log_transform(const std::vector<std::vector<double>>& measurements,
                                         const std::vector<std::string>& sample_ids = {}) {
  std::vector<double> out;
  out.reserve(measurements.size());
  std::vector<std::string> offenders;
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const auto& ms = measurements[i];
    const std::string name = i < sample_ids.size() ? sample_ids[i] : "#" + std::to_string(i);
    if (ms.empty()) throw DataError("sample " + name + " has no measurements");
    double sum = 0.0;
    bool bad = false;
    for (double v : ms) {
      if (!(v > 0.0)) bad = true;
      sum += v;
    }
    if (bad) {
      offenders.push_back(name);
      continue;
    }
    out.push_back(std::log(sum / static_cast<double>(ms.size())));
  }
  if (!offenders.empty()) {
    std::string list;
    for (const auto& o : offenders) list += (list.empty() ? "" : ", ") + o;
    throw DataError("log transform needs positive values; offending samples: " + list);
  }
  return out;
}

inline std::vector<double> log_transform(const std::vector<double>& values) {
  std::vector<std::vector<double>> wrapped;
  wrapped.reserve(values.size());
  for (double v : values) wrapped.push_back({v});
  return log_transform(wrapped);
}

}  // namespace dlgwas
