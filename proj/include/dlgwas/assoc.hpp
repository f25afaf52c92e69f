#pragma once
// Single-SNP association scan: every SNP is fitted together with an intercept
// and the covariates, and its dosage coefficient is Wald-tested. Binary traits
// use logistic regression by IRLS, continuous traits use OLS with a t test.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dlgwas/error.hpp"
#include "dlgwas/genotype.hpp"
#include "dlgwas/io.hpp"
#include "dlgwas/parallel.hpp"
#include "dlgwas/phenotype.hpp"
#include "dlgwas/special.hpp"

namespace dlgwas {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Covariate columns added after the intercept; the SNP dosage is appended last.
struct DesignSpec {
  std::vector<std::string> covariates;

  void validate() const {
    std::set<std::string> seen;
    for (const auto& c : covariates) {
      if (c == "intercept" || c == "dosage") throw ConfigError("covariate name '" + c + "' is reserved");
      if (!seen.insert(c).second) throw ConfigError("duplicate covariate '" + c + "'");
    }
  }
};

// --- OLS ------------------------------------------------------------------

struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd stderr_;
  Eigen::VectorXd t_stats;
  Eigen::VectorXd log_p;  // natural log of the two-sided p-value
  double sigma2 = 0.0;
  Eigen::Index df = 0;
  bool degenerate = false;  // zero residual variance; p-values reported as 0

  // std::exp, not the vectorised Eigen exp: exp(-inf) must stay exactly 0.
  Eigen::VectorXd p_values() const { return log_p.unaryExpr([](double v) { return std::exp(v); }); }
};

namespace detail {

// (X^T X)^{-1} from a column-pivoted QR of X.
inline Eigen::MatrixXd unscaled_covariance(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr) {
  const Eigen::Index p = qr.cols();
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  return perm * inner * perm.transpose();
}

// Eigen's default rank threshold (eps * p) misses exact collinearity once
// rounding in the Householder steps grows with n; 1e-10 relative does not.
inline constexpr double kRankThreshold = 1e-10;

inline Eigen::ColPivHouseholderQR<Eigen::MatrixXd> pivoted_qr(const Eigen::MatrixXd& x) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x.rows(), x.cols());
  qr.setThreshold(kRankThreshold);
  qr.compute(x);
  return qr;
}

}  // namespace detail

inline OlsFit ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != n) throw DimensionMismatchError("OLS: response length differs from design rows");
  if (n <= p) throw SingularDesignError("OLS needs more rows than columns");
  const auto qr = detail::pivoted_qr(x);
  if (qr.rank() < p) throw SingularDesignError("OLS: design matrix is rank deficient");
  OlsFit f;
  f.beta = qr.solve(y);
  const Eigen::VectorXd resid = y - x * f.beta;
  const double rss = resid.squaredNorm();
  f.df = n - p;
  f.sigma2 = rss / static_cast<double>(f.df);
  const Eigen::MatrixXd cov = detail::unscaled_covariance(qr);
  f.stderr_.resize(p);
  f.t_stats.resize(p);
  f.log_p.resize(p);
  const double scale = std::max(1.0, y.squaredNorm());
  f.degenerate = rss <= 1e-24 * scale;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (f.degenerate) {
      f.stderr_(i) = 0.0;
      f.t_stats(i) = f.beta(i) == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), f.beta(i));
      f.log_p(i) = f.beta(i) == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
      continue;
    }
    f.stderr_(i) = std::sqrt(f.sigma2 * cov(i, i));
    f.t_stats(i) = f.beta(i) / f.stderr_(i);
    f.log_p(i) = special::log_two_sided_t_p(f.t_stats(i), static_cast<double>(f.df));
  }
  return f;
}

// --- logistic regression --------------------------------------------------

struct LogisticFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd stderr_;
  Eigen::VectorXd z_stats;
  Eigen::VectorXd log_p;
  bool converged = false;
  bool separated = false;
  int iterations = 0;
};

struct IrlsOptions {
  int max_iter = 25;
  double tol = 1e-8;
  double separation_bound = 30.0;
};

inline double logistic_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double z = eta(i);
    ll -= std::max(z, 0.0) - z * y(i) + std::log1p(std::exp(-std::abs(z)));
  }
  return ll;
}

// Newton-Raphson for the logistic MLE. Converged when max |step| < tol;
// aborts with separated = true once any |beta| exceeds the bound. Standard
// errors come from the inverse observed information at the final estimate.
inline LogisticFit logistic_irls(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, IrlsOptions opt = {},
                                 const Eigen::VectorXd* start = nullptr) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != n) throw DimensionMismatchError("IRLS: response length differs from design rows");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) throw DataError("logistic regression needs 0/1 responses");
  }
  if (n <= p) throw SingularDesignError("IRLS needs more rows than columns");
  if (detail::pivoted_qr(x).rank() < p) {
    throw SingularDesignError("IRLS: design matrix is rank deficient");
  }
  LogisticFit f;
  f.beta = start ? *start : Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = x * f.beta;
  double ll = logistic_loglik(y, eta);
  Eigen::VectorXd mu(n);
  Eigen::VectorXd w(n);
  Eigen::LDLT<Eigen::MatrixXd> info;
  for (f.iterations = 1; f.iterations <= opt.max_iter; ++f.iterations) {
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = 1.0 / (1.0 + std::exp(-eta(i)));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    const Eigen::VectorXd grad = x.transpose() * (y - mu);
    info.compute(x.transpose() * w.asDiagonal() * x);
    if (info.info() != Eigen::Success) break;
    Eigen::VectorXd step = info.solve(grad);
    // Step halving keeps the log-likelihood non-decreasing.
    Eigen::VectorXd candidate = f.beta + step;
    Eigen::VectorXd cand_eta = x * candidate;
    double cand_ll = logistic_loglik(y, cand_eta);
    for (int halve = 0; halve < 30 && cand_ll < ll - 1e-12 * std::abs(ll); ++halve) {
      step *= 0.5;
      candidate = f.beta + step;
      cand_eta = x * candidate;
      cand_ll = logistic_loglik(y, cand_eta);
    }
    f.beta = candidate;
    eta = cand_eta;
    ll = cand_ll;
    if (f.beta.cwiseAbs().maxCoeff() > opt.separation_bound) {
      f.separated = true;
      break;
    }
    if (step.cwiseAbs().maxCoeff() < opt.tol) {
      f.converged = true;
      break;
    }
  }
  f.iterations = std::min(f.iterations, opt.max_iter);
  if (!f.converged && !f.separated) {
    // Fitted probabilities collapsing onto the labels also indicate separation.
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) worst = std::max(worst, std::abs(y(i) - 1.0 / (1.0 + std::exp(-eta(i)))));
    f.separated = worst < 1e-6;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    mu(i) = 1.0 / (1.0 + std::exp(-eta(i)));
    w(i) = mu(i) * (1.0 - mu(i));
  }
  info.compute(x.transpose() * w.asDiagonal() * x);
  const Eigen::MatrixXd cov = info.solve(Eigen::MatrixXd::Identity(p, p));
  f.stderr_ = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  f.z_stats = f.beta.cwiseQuotient(f.stderr_);
  f.log_p.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) f.log_p(i) = special::log_two_sided_normal_p(f.z_stats(i));
  return f;
}

// --- scan -----------------------------------------------------------------

struct AssocRow {
  std::string snp_id;
  double beta_hat = kNaN;
  double stderr_ = kNaN;
  double statistic = kNaN;  // Wald z (binary) or t (continuous)
  double neg_log10_p = kNaN;
  std::size_t n_used = 0;
  bool converged = false;
  std::string error;

  double p_value() const { return std::pow(10.0, -neg_log10_p); }
};

struct AssocResult {
  std::vector<AssocRow> rows;
  TraitKind trait_kind = TraitKind::binary;
  double alpha = 0.05;

  double bonferroni_neg_log10() const {
    return -std::log10(alpha / static_cast<double>(std::max<std::size_t>(1, rows.size())));
  }
};

inline Eigen::MatrixXd base_design(const PhenotypeTable& p, const DesignSpec& spec) {
  spec.validate();
  Eigen::MatrixXd base(static_cast<Eigen::Index>(p.size()), static_cast<Eigen::Index>(spec.covariates.size() + 1));
  base.col(0).setOnes();
  for (std::size_t c = 0; c < spec.covariates.size(); ++c) {
    const auto it = std::find(p.covariate_names.begin(), p.covariate_names.end(), spec.covariates[c]);
    if (it == p.covariate_names.end()) throw ConfigError("covariate '" + spec.covariates[c] + "' not in phenotype table");
    base.col(static_cast<Eigen::Index>(c + 1)) = p.covariates.col(it - p.covariate_names.begin());
  }
  return base;
}

struct ScanOptions {
  unsigned threads = 1;
  double alpha = 0.05;
  IrlsOptions irls;
};

// Tests every SNP of `g` against the trait in `p` (rows aligned by sample id).
// Samples with a missing dosage or non-finite trait/covariate are dropped per
// SNP. Fit failures are recorded in the row and the scan continues.
inline AssocResult scan(const GenotypeMatrix& g, const PhenotypeTable& phenotypes, const DesignSpec& spec,
                        ScanOptions options = {}) {
  const PhenotypeTable p = phenotypes.sample_ids == g.sample_ids() ? phenotypes : phenotypes.aligned_to(g.sample_ids());
  const Eigen::MatrixXd base = base_design(p, spec);
  const Eigen::Index n = base.rows();
  const Eigen::Index q = base.cols();
  std::vector<bool> usable(static_cast<std::size_t>(n), true);
  for (Eigen::Index i = 0; i < n; ++i) {
    usable[static_cast<std::size_t>(i)] = std::isfinite(p.trait[static_cast<std::size_t>(i)]) && base.row(i).allFinite();
  }
  const bool binary = p.trait_kind == TraitKind::binary;

  // Covariate-only logistic fit seeds every per-SNP IRLS run.
  Eigen::VectorXd null_start = Eigen::VectorXd::Zero(q + 1);
  if (binary) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (usable[static_cast<std::size_t>(i)]) rows.push_back(i);
    }
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) y(static_cast<Eigen::Index>(r)) = p.trait[static_cast<std::size_t>(rows[r])];
    try {
      const auto null_fit = logistic_irls(y, base(rows, Eigen::all), options.irls);
      if (null_fit.converged) null_start.head(q) = null_fit.beta;
    } catch (const DataError&) {
      // Per-SNP fits will report the problem.
    }
  }

  AssocResult result;
  result.trait_kind = p.trait_kind;
  result.alpha = options.alpha;
  result.rows.resize(g.n_snps());
  parallel_for(g.n_snps(), options.threads, [&](std::size_t j) {
    AssocRow& row = result.rows[j];
    row.snp_id = g.snp_ids()[j];
    const auto col = g.column(j);
    std::vector<Eigen::Index> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (usable[static_cast<std::size_t>(i)] && col[static_cast<std::size_t>(i)] != kMissing) rows.push_back(i);
    }
    row.n_used = rows.size();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), q + 1);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto rr = static_cast<Eigen::Index>(r);
      x.row(rr).head(q) = base.row(rows[r]);
      x(rr, q) = col[static_cast<std::size_t>(rows[r])];
      y(rr) = p.trait[static_cast<std::size_t>(rows[r])];
    }
    try {
      if (binary) {
        const auto fit = logistic_irls(y, x, options.irls, &null_start);
        row.beta_hat = fit.beta(q);
        row.stderr_ = fit.stderr_(q);
        row.statistic = fit.z_stats(q);
        row.neg_log10_p = -fit.log_p(q) / std::numbers::ln10;
        row.converged = fit.converged;
        if (fit.separated) row.error = "separation";
      } else {
        const auto fit = ols_fit(y, x);
        row.beta_hat = fit.beta(q);
        row.stderr_ = fit.stderr_(q);
        row.statistic = fit.t_stats(q);
        row.neg_log10_p = -fit.log_p(q) / std::numbers::ln10;
        row.converged = true;
        if (fit.degenerate) row.error = "degenerate";
      }
    } catch (const DataError& e) {
      row.converged = false;
      row.error = e.what();
    }
  });
  return result;
}

// --- scan TSV -------------------------------------------------------------

inline std::string write_scan_tsv(const AssocResult& r) {
  std::ostringstream out;
  out << "# trait_kind=" << to_string(r.trait_kind) << " n_tests=" << r.rows.size()
      << " alpha=" << io::format_double(r.alpha) << " bonferroni_neg_log10_p=" << io::format_fixed(r.bonferroni_neg_log10(), 6)
      << '\n';
  out << "snp_id\tbeta\tse\tstat\tneg_log10_p\tconverged\n";
  for (const auto& row : r.rows) {
    out << row.snp_id << '\t' << io::format_double(row.beta_hat) << '\t' << io::format_double(row.stderr_) << '\t'
        << io::format_double(row.statistic) << '\t' << io::format_double(row.neg_log10_p) << '\t'
        << (row.converged ? 1 : 0) << '\n';
  }
  return out.str();
}

struct ScanTable {
  std::vector<std::string> snp_ids;
  std::vector<double> neg_log10_p;
  std::vector<double> beta;
  double bonferroni_neg_log10_p = kNaN;
};

inline ScanTable parse_scan_tsv(const std::string& text, const std::string& context = "scan TSV") {
  std::istringstream in(text);
  std::string line;
  ScanTable t;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      const auto key = line.find("bonferroni_neg_log10_p=");
      if (key != std::string::npos) {
        t.bonferroni_neg_log10_p = io::parse_double(line.substr(key + 23, line.find(' ', key) - key - 23), context);
      }
      continue;
    }
    header = io::split_tabs(line);
    break;
  }
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(context + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_c = col("snp_id");
  const auto p_c = col("neg_log10_p");
  const auto b_c = col("beta");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split_tabs(line);
    if (f.size() != header.size()) throw ParseError(context + ": ragged row");
    t.snp_ids.push_back(f[id_c]);
    t.neg_log10_p.push_back(io::parse_double(f[p_c], context));
    t.beta.push_back(io::parse_double(f[b_c], context));
  }
  return t;
}

}  // namespace dlgwas
