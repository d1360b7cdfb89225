#include "multicause/dataset.hpp"

#include "multicause/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

namespace multicause {

namespace {

void require_finite(const MatrixXd& m, const char* block) {
  if (!m.allFinite()) throw InputError(std::string("non-finite entry in block ") + block);
}

void require_rows(const std::optional<MatrixXd>& m, Index n, const char* block) {
  if (m && m->rows() != n) {
    std::ostringstream msg;
    msg << "block " << block << " has " << m->rows() << " rows, expected " << n;
    throw InputError(msg.str());
  }
}

std::vector<std::string> default_labels(const std::string& prefix, Index count) {
  std::vector<std::string> out;
  for (Index j = 0; j < count; ++j) out.push_back(prefix + std::to_string(j + 1));
  return out;
}

MatrixXd take_rows(const MatrixXd& m, std::span<const Index> index) {
  MatrixXd out(static_cast<Index>(index.size()), m.cols());
  for (std::size_t i = 0; i < index.size(); ++i) out.row(static_cast<Index>(i)) = m.row(index[i]);
  return out;
}

std::string trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

Dataset::Dataset(VectorXd y, MatrixXd x, std::optional<MatrixXd> z, std::optional<MatrixXd> w,
                 std::optional<ColumnNames> names)
    : y_(std::move(y)), x_(std::move(x)), z_(std::move(z)), w_(std::move(w)) {
  const Index n = y_.size();
  if (n < 1) throw InputError("dataset needs at least one row");
  if (x_.cols() < 1) throw InputError("dataset needs at least one treatment column");
  if (x_.rows() != n) throw InputError("treatment block row count differs from outcome length");
  require_rows(z_, n, "z");
  require_rows(w_, n, "w");
  if (z_ && z_->cols() < 1) throw InputError("instrument block present but empty");
  if (w_ && w_->cols() < 1) throw InputError("proxy block present but empty");
  require_finite(y_, "y");
  require_finite(x_, "x");
  if (z_) require_finite(*z_, "z");
  if (w_) require_finite(*w_, "w");

  if (names) {
    names_ = std::move(*names);
    if (static_cast<Index>(names_.treatments.size()) != p() ||
        static_cast<Index>(names_.instruments.size()) != r() ||
        static_cast<Index>(names_.proxies.size()) != s())
      throw InputError("column name counts do not match block widths");
  } else {
    names_.treatments = default_labels("x", p());
    names_.instruments = default_labels("z", r());
    names_.proxies = default_labels("w", s());
  }
}

const MatrixXd& Dataset::z() const {
  if (!z_) throw InputError("dataset has no instrument block");
  return *z_;
}

const MatrixXd& Dataset::w() const {
  if (!w_) throw InputError("dataset has no proxy block");
  return *w_;
}

Dataset Dataset::rows(std::span<const Index> index) const {
  VectorXd y(static_cast<Index>(index.size()));
  for (std::size_t i = 0; i < index.size(); ++i) y(static_cast<Index>(i)) = y_(index[i]);
  std::optional<MatrixXd> z, w;
  if (z_) z = take_rows(*z_, index);
  if (w_) w = take_rows(*w_, index);
  return Dataset(std::move(y), take_rows(x_, index), std::move(z), std::move(w), names_);
}

std::pair<Dataset, CenteringInfo> center(const Dataset& d) {
  if (d.n() < 2) throw InputError("centering needs n >= 2");
  CenteringInfo info;
  info.y_mean = d.y().mean();
  info.x_mean = d.x().colwise().mean().transpose();
  VectorXd y = d.y().array() - info.y_mean;
  MatrixXd x = d.x().rowwise() - info.x_mean.transpose();
  std::optional<MatrixXd> z, w;
  if (d.has_z()) {
    info.z_mean = d.z().colwise().mean().transpose();
    z = d.z().rowwise() - info.z_mean.transpose();
  }
  if (d.has_w()) {
    info.w_mean = d.w().colwise().mean().transpose();
    w = d.w().rowwise() - info.w_mean.transpose();
  }
  return {Dataset(std::move(y), std::move(x), std::move(z), std::move(w), d.names()), info};
}

Dataset uncenter(const Dataset& d, const CenteringInfo& info) {
  VectorXd y = d.y().array() + info.y_mean;
  MatrixXd x = d.x().rowwise() + info.x_mean.transpose();
  std::optional<MatrixXd> z, w;
  if (d.has_z()) z = d.z().rowwise() + info.z_mean.transpose();
  if (d.has_w()) w = d.w().rowwise() + info.w_mean.transpose();
  return Dataset(std::move(y), std::move(x), std::move(z), std::move(w), d.names());
}

CsvSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open schema file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("schema " + path + " is not valid JSON: " + e.what());
  }
  CsvSchema schema;
  try {
    schema.outcome = j.at("outcome").get<std::string>();
    schema.treatments = j.at("treatments").get<std::vector<std::string>>();
    if (j.contains("instruments")) schema.instruments = j["instruments"].get<std::vector<std::string>>();
    if (j.contains("proxies")) schema.proxies = j["proxies"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("schema " + path + ": " + e.what());
  }
  return schema;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError("CSV file has no header: " + path);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_line(line);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t c = 0; c < header.size(); ++c) position.emplace(header[c], c);

  auto lookup = [&](const std::vector<std::string>& cols) {
    std::vector<std::size_t> idx;
    for (const auto& name : cols) {
      auto it = position.find(name);
      if (it == position.end()) throw InputError("CSV " + path + " has no column '" + name + "'");
      idx.push_back(it->second);
    }
    return idx;
  };
  if (schema.treatments.empty()) throw InputError("schema lists no treatment columns");
  const auto y_idx = lookup({schema.outcome});
  const auto x_idx = lookup(schema.treatments);
  const auto z_idx = lookup(schema.instruments);
  const auto w_idx = lookup(schema.proxies);

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << "CSV " << path << " line " << line_no << " has " << cells.size() << " cells, header has "
          << header.size();
      throw InputError(msg.str());
    }
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto& cell = cells[c];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << "CSV " << path << " line " << line_no << " column '" << header[c]
            << "': cannot use cell '" << cell << "' as a finite number";
        throw InputError(msg.str());
      }
      values[c] = v;
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw InputError("CSV file has no data rows: " + path);

  const auto n = static_cast<Index>(rows.size());
  auto gather = [&](const std::vector<std::size_t>& idx) {
    MatrixXd m(n, static_cast<Index>(idx.size()));
    for (Index i = 0; i < n; ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) m(i, static_cast<Index>(j)) = rows[i][idx[j]];
    return m;
  };
  VectorXd y = gather(y_idx).col(0);
  std::optional<MatrixXd> z, w;
  if (!z_idx.empty()) z = gather(z_idx);
  if (!w_idx.empty()) w = gather(w_idx);
  ColumnNames names{schema.outcome, schema.treatments, schema.instruments, schema.proxies};
  return Dataset(std::move(y), gather(x_idx), std::move(z), std::move(w), std::move(names));
}

void write_csv(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write CSV file: " + path);
  const auto& names = d.names();
  out << names.outcome;
  for (const auto& n : names.treatments) out << ',' << n;
  for (const auto& n : names.instruments) out << ',' << n;
  for (const auto& n : names.proxies) out << ',' << n;
  out << '\n' << std::setprecision(17);
  for (Index i = 0; i < d.n(); ++i) {
    out << d.y()(i);
    for (Index j = 0; j < d.p(); ++j) out << ',' << d.x()(i, j);
    for (Index j = 0; j < d.r(); ++j) out << ',' << d.z()(i, j);
    for (Index j = 0; j < d.s(); ++j) out << ',' << d.w()(i, j);
    out << '\n';
  }
}

}  // namespace multicause
