#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dynalloc/csv.hpp"
#include "dynalloc/date.hpp"
#include "dynalloc/error.hpp"
#include "dynalloc/linalg.hpp"

namespace dynalloc {

/// Date-indexed matrix of daily simple returns (decimal fractions), rows are
/// dates and columns are assets. Immutable once constructed; the constructor
/// enforces strictly increasing dates, unique asset names, finite cells and
/// the daily sanity bound |r| < 1.
class ReturnPanel {
 public:
  ReturnPanel() = default;

  ReturnPanel(std::vector<Date> dates, std::vector<std::string> assets, Matrix values)
      : dates_(std::move(dates)), assets_(std::move(assets)), values_(std::move(values)) {
    require(values_.rows() == static_cast<Eigen::Index>(dates_.size()) &&
                values_.cols() == static_cast<Eigen::Index>(assets_.size()),
            ErrorKind::LengthMismatch, "panel shape does not match dates/assets");
    for (std::size_t i = 1; i < dates_.size(); ++i) {
      require(dates_[i - 1] < dates_[i], ErrorKind::NonMonotonicDates,
              "dates not strictly increasing at " + dates_[i].to_string());
    }
    std::set<std::string> seen;
    for (const auto& a : assets_) {
      require(seen.insert(a).second, ErrorKind::DuplicateAsset, "duplicate asset '" + a + "'");
    }
    for (Eigen::Index r = 0; r < values_.rows(); ++r) {
      for (Eigen::Index c = 0; c < values_.cols(); ++c) {
        const double v = values_(r, c);
        require(std::isfinite(v), ErrorKind::MissingValue,
                "missing value at " + dates_[static_cast<std::size_t>(r)].to_string() + "/" +
                    assets_[static_cast<std::size_t>(c)]);
        require(std::abs(v) < 1.0, ErrorKind::ReturnOutOfRange,
                "daily return outside (-1, 1) at " + dates_[static_cast<std::size_t>(r)].to_string());
      }
    }
  }

  const std::vector<Date>& dates() const { return dates_; }
  const std::vector<std::string>& assets() const { return assets_; }
  const Matrix& values() const { return values_; }
  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }
  bool empty() const { return dates_.empty(); }

  Eigen::Index asset_index(const std::string& name) const {
    auto it = std::find(assets_.begin(), assets_.end(), name);
    require(it != assets_.end(), ErrorKind::UnknownAsset, "unknown asset '" + name + "'");
    return static_cast<Eigen::Index>(it - assets_.begin());
  }

  Vector column(const std::string& name) const { return values_.col(asset_index(name)); }

  /// Rows [begin, end).
  ReturnPanel slice(Eigen::Index begin, Eigen::Index end) const {
    begin = std::clamp<Eigen::Index>(begin, 0, rows());
    end = std::clamp<Eigen::Index>(end, begin, rows());
    std::vector<Date> d(dates_.begin() + begin, dates_.begin() + end);
    return ReturnPanel(std::move(d), assets_, values_.middleRows(begin, end - begin));
  }

  /// Number of rows dated on or before `d`.
  Eigen::Index rows_through(const Date& d) const {
    return static_cast<Eigen::Index>(std::upper_bound(dates_.begin(), dates_.end(), d) - dates_.begin());
  }

  ReturnPanel truncate_after(const Date& d) const { return slice(0, rows_through(d)); }

  ReturnPanel select(const std::vector<std::string>& names) const {
    Matrix v(rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) v.col(static_cast<Eigen::Index>(k)) = column(names[k]);
    return ReturnPanel(dates_, names, std::move(v));
  }

 private:
  std::vector<Date> dates_;
  std::vector<std::string> assets_;
  Matrix values_;
};

enum class PanelKind { prices, returns };

/// Parses a `date,<asset1>,...` CSV. Prices are converted to simple returns
/// p_t / p_{t-1} - 1, which drops the first row.
inline ReturnPanel parse_panel(std::istream& in, PanelKind kind, const std::string& source = "<stream>") {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::EmptyPanel, source + ": missing header row");
  auto header = csv::split(line);
  require(header.size() >= 2 && header[0] == "date", ErrorKind::ParseError,
          source + ": header must be 'date,<asset>,...'");
  std::vector<std::string> assets(header.begin() + 1, header.end());
  const std::size_t n = assets.size();

  std::vector<Date> dates;
  std::vector<double> cells;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    auto fields = csv::split(line);
    const std::string where = source + ":" + std::to_string(line_no);
    require(fields.size() == n + 1, ErrorKind::MissingValue, where + ": expected " + std::to_string(n + 1) + " fields");
    const Date d = Date::parse(fields[0]);
    if (!dates.empty()) {
      require(dates.back() < d, ErrorKind::NonMonotonicDates, where + ": dates not strictly increasing");
    }
    dates.push_back(d);
    for (std::size_t k = 0; k < n; ++k) {
      const double v = csv::parse_number(fields[k + 1], where + " column " + assets[k]);
      if (kind == PanelKind::prices) {
        require(v > 0.0, ErrorKind::NonPositivePrice, where + ": non-positive price for " + assets[k]);
      }
      cells.push_back(v);
    }
  }
  const auto t = static_cast<Eigen::Index>(dates.size());
  Matrix raw(t, static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < t; ++r)
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(n); ++c)
      raw(r, c) = cells[static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c)];

  if (kind == PanelKind::returns) return ReturnPanel(std::move(dates), std::move(assets), std::move(raw));

  if (t < 2) return ReturnPanel({}, std::move(assets), Matrix(0, static_cast<Eigen::Index>(n)));
  Matrix rets = raw.bottomRows(t - 1).cwiseQuotient(raw.topRows(t - 1)).array() - 1.0;
  dates.erase(dates.begin());
  return ReturnPanel(std::move(dates), std::move(assets), std::move(rets));
}

inline ReturnPanel load_panel(const std::filesystem::path& path, PanelKind kind) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::FileNotFound, "cannot open '" + path.string() + "'");
  return parse_panel(in, kind, path.string());
}

inline void write_panel(std::ostream& out, const ReturnPanel& panel) {
  out << "date";
  for (const auto& a : panel.assets()) out << ',' << a;
  out << '\n';
  for (Eigen::Index r = 0; r < panel.rows(); ++r) {
    out << panel.dates()[static_cast<std::size_t>(r)].to_string();
    for (Eigen::Index c = 0; c < panel.cols(); ++c) out << ',' << csv::format(panel.values()(r, c));
    out << '\n';
  }
}

/// Explicit alignment utility: keeps only dates present in every panel.
inline ReturnPanel inner_join(const std::vector<ReturnPanel>& panels) {
  require(!panels.empty(), ErrorKind::EmptyPanel, "inner_join: no panels");
  std::vector<Date> common = panels.front().dates();
  for (std::size_t p = 1; p < panels.size(); ++p) {
    std::vector<Date> next;
    std::set_intersection(common.begin(), common.end(), panels[p].dates().begin(), panels[p].dates().end(),
                          std::back_inserter(next));
    common = std::move(next);
  }
  std::vector<std::string> assets;
  for (const auto& p : panels) assets.insert(assets.end(), p.assets().begin(), p.assets().end());
  Matrix v(static_cast<Eigen::Index>(common.size()), static_cast<Eigen::Index>(assets.size()));
  Eigen::Index col = 0;
  for (const auto& p : panels) {
    std::size_t r_src = 0;
    for (std::size_t r = 0; r < common.size(); ++r) {
      while (p.dates()[r_src] < common[r]) ++r_src;
      v.row(static_cast<Eigen::Index>(r)).segment(col, p.cols()) = p.values().row(static_cast<Eigen::Index>(r_src));
    }
    col += p.cols();
  }
  return ReturnPanel(std::move(common), std::move(assets), std::move(v));
}

/// Fixed-weight mix, rebalanced daily back to its target weights.
struct CompositeSpec {
  std::vector<std::pair<std::string, double>> weights;
};

/// The static 50/40/10 equities/bonds/commodities market proxy.
inline CompositeSpec saa_spec(const std::string& equities, const std::string& bonds, const std::string& commodities) {
  return {{{equities, 0.5}, {bonds, 0.4}, {commodities, 0.1}}};
}

inline ReturnPanel composite_index(const ReturnPanel& panel, const CompositeSpec& spec,
                                   const std::string& name = "composite") {
  double total = 0.0;
  for (const auto& [asset, w] : spec.weights) {
    require(w >= 0.0, ErrorKind::WeightSumError, "negative composite weight for '" + asset + "'");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-12, ErrorKind::WeightSumError,
          "composite weights sum to " + csv::format(total) + ", expected 1");
  Vector out = Vector::Zero(panel.rows());
  for (const auto& [asset, w] : spec.weights) out += w * panel.values().col(panel.asset_index(asset));
  return ReturnPanel(panel.dates(), {name}, Matrix(out));
}

/// Row indices of the last trading date in each calendar month, ascending.
inline std::vector<Eigen::Index> month_end_rows(const ReturnPanel& panel) {
  require(!panel.empty(), ErrorKind::EmptyPanel, "month_ends: empty panel");
  std::vector<Eigen::Index> out;
  const auto& d = panel.dates();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i + 1 == d.size() || !d[i].same_month(d[i + 1])) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

inline std::vector<Date> month_ends(const ReturnPanel& panel) {
  std::vector<Date> out;
  for (auto r : month_end_rows(panel)) out.push_back(panel.dates()[static_cast<std::size_t>(r)]);
  return out;
}

/// Dated numeric table with named columns; unlike a ReturnPanel, cells may
/// be missing (NaN) and values are not range-checked.
struct DatedTable {
  std::vector<Date> dates;
  std::vector<std::string> columns;
  Matrix values;

  Eigen::Index column_index(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    require(it != columns.end(), ErrorKind::UnknownAsset, "unknown column '" + name + "'");
    return static_cast<Eigen::Index>(it - columns.begin());
  }
};

inline DatedTable parse_table(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::EmptyPanel, source + ": missing header row");
  auto header = csv::split(line);
  require(header.size() >= 2 && header[0] == "date", ErrorKind::ParseError,
          source + ": header must be 'date,<column>,...'");
  DatedTable t;
  t.columns.assign(header.begin() + 1, header.end());
  const std::size_t n = t.columns.size();
  std::vector<double> cells;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    auto fields = csv::split(line);
    const std::string where = source + ":" + std::to_string(line_no);
    require(fields.size() == n + 1, ErrorKind::ParseError, where + ": expected " + std::to_string(n + 1) + " fields");
    const Date d = Date::parse(fields[0]);
    require(t.dates.empty() || t.dates.back() < d, ErrorKind::NonMonotonicDates, where + ": dates not strictly increasing");
    t.dates.push_back(d);
    for (std::size_t k = 0; k < n; ++k) {
      try {
        cells.push_back(csv::parse_number(fields[k + 1], where));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::MissingValue) throw;
        cells.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
  }
  t.values = Matrix(static_cast<Eigen::Index>(t.dates.size()), static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < t.values.rows(); ++r)
    for (Eigen::Index c = 0; c < t.values.cols(); ++c)
      t.values(r, c) = cells[static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c)];
  return t;
}

inline DatedTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::FileNotFound, "cannot open '" + path.string() + "'");
  return parse_table(in, path.string());
}

}  // namespace dynalloc
