#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace multicause {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Column labels grouped by role.
struct ColumnNames {
  std::string outcome = "y";
  std::vector<std::string> treatments;
  std::vector<std::string> instruments;
  std::vector<std::string> proxies;
};

/// Observed sample: outcome y (n), treatments x (n x p), optional
/// auxiliary variables z (n x r) and outcome-inducing proxies w (n x s).
///
/// Construction validates shapes and rejects non-finite cells; the object is
/// immutable afterwards.
class Dataset {
 public:
  Dataset(VectorXd y, MatrixXd x, std::optional<MatrixXd> z = std::nullopt,
          std::optional<MatrixXd> w = std::nullopt, std::optional<ColumnNames> names = std::nullopt);

  Index n() const { return y_.size(); }
  Index p() const { return x_.cols(); }
  Index r() const { return z_ ? z_->cols() : 0; }
  Index s() const { return w_ ? w_->cols() : 0; }

  const VectorXd& y() const { return y_; }
  const MatrixXd& x() const { return x_; }
  bool has_z() const { return z_.has_value(); }
  bool has_w() const { return w_.has_value(); }
  // Throws InputError when the block is absent.
  const MatrixXd& z() const;
  const MatrixXd& w() const;
  const ColumnNames& names() const { return names_; }

  /// Rows picked by index (with repetition), e.g. for bootstrap resamples.
  Dataset rows(std::span<const Index> index) const;

 private:
  VectorXd y_;
  MatrixXd x_;
  std::optional<MatrixXd> z_;
  std::optional<MatrixXd> w_;
  ColumnNames names_;
};

/// Column means removed by center().
struct CenteringInfo {
  double y_mean = 0.0;
  VectorXd x_mean;
  VectorXd z_mean;  // empty when z absent
  VectorXd w_mean;  // empty when w absent
};

std::pair<Dataset, CenteringInfo> center(const Dataset& d);
Dataset uncenter(const Dataset& d, const CenteringInfo& info);

/// Role map for CSV ingestion; columns are taken in the listed order.
struct CsvSchema {
  std::string outcome;
  std::vector<std::string> treatments;
  std::vector<std::string> instruments;
  std::vector<std::string> proxies;
};

/// Reads {"outcome": ..., "treatments": [...], "instruments": [...], "proxies": [...]}.
CsvSchema load_schema(const std::string& path);
Dataset load_csv(const std::string& path, const CsvSchema& schema);
void write_csv(const std::string& path, const Dataset& d);

}  // namespace multicause
