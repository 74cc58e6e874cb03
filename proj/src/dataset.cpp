#include "snptree/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace snptree {

Family family_from_string(const std::string& s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "binomial") return Family::binomial;
  fail(errc::bad_format, "unknown family '" + s + "' (expected gaussian or binomial)");
}

std::string to_string(Family f) { return f == Family::gaussian ? "gaussian" : "binomial"; }

int Dataset::col_index(const std::string& name) const {
  if (name_index_.empty() && !colnames.empty()) {
    for (int j = 0; j < p(); ++j) name_index_.emplace(colnames[j], j);
  }
  auto it = name_index_.find(name);
  return it == name_index_.end() ? -1 : it->second;
}

Dataset make_dataset(Eigen::MatrixXd x, Eigen::VectorXd y, Eigen::MatrixXd clvar,
                     std::vector<std::string> colnames, Family family) {
  const auto n = x.rows();
  if (y.size() != n)
    fail(errc::dimension_mismatch, "x has " + std::to_string(n) + " rows but y has " +
                                       std::to_string(y.size()) + " values");
  if (clvar.size() > 0 && clvar.rows() != n)
    fail(errc::dimension_mismatch, "clvar has " + std::to_string(clvar.rows()) +
                                       " rows, expected " + std::to_string(n));
  if (static_cast<Eigen::Index>(colnames.size()) != x.cols())
    fail(errc::dimension_mismatch, "got " + std::to_string(colnames.size()) + " column names for " +
                                       std::to_string(x.cols()) + " columns");
  if (n < 8) fail(errc::dimension_mismatch, "need at least 8 observations, got " + std::to_string(n));

  if (!x.allFinite() || !y.allFinite() || (clvar.size() > 0 && !clvar.allFinite()))
    fail(errc::missing_value, "data contain non-finite values");

  std::unordered_set<std::string> seen;
  for (const auto& name : colnames) {
    if (!seen.insert(name).second) fail(errc::duplicate_colname, "duplicate column name '" + name + "'");
  }

  if (family == Family::binomial) {
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (y[i] == 0.0)
        has0 = true;
      else if (y[i] == 1.0)
        has1 = true;
      else
        fail(errc::non_binary_response,
             "family=binomial requires y in {0,1}, found " + std::to_string(y[i]));
    }
    if (!has0 || !has1)
      fail(errc::non_binary_response, "family=binomial requires both response classes present");
  }

  Dataset d;
  d.x = std::move(x);
  d.y = std::move(y);
  d.clvar = std::move(clvar);
  d.colnames = std::move(colnames);
  d.family = family;
  return d;
}

std::vector<std::string> BlockMap::block_order() const {
  std::vector<std::string> order;
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (seen.insert(e.block).second) order.push_back(e.block);
  }
  return order;
}

std::unordered_map<std::string, std::string> BlockMap::index() const {
  std::unordered_map<std::string, std::string> map;
  for (const auto& e : entries) {
    if (e.block.empty()) fail(errc::bad_format, "empty block label for column '" + e.colname + "'");
    if (!map.emplace(e.colname, e.block).second)
      fail(errc::duplicate_colname, "column '" + e.colname + "' listed twice in block map");
  }
  return map;
}

Family StudyCollection::family() const {
  return studies.empty() ? Family::gaussian : studies.front().family;
}

std::vector<std::string> StudyCollection::column_universe() const {
  std::vector<std::string> universe;
  std::unordered_set<std::string> seen;
  for (const auto& d : studies) {
    for (const auto& name : d.colnames) {
      if (seen.insert(name).second) universe.push_back(name);
    }
  }
  return universe;
}

StudyCollection make_study_collection(std::vector<Dataset> studies) {
  if (studies.empty()) fail(errc::empty_input, "study collection needs at least one study");
  for (const auto& d : studies) {
    if (d.family != studies.front().family)
      fail(errc::dimension_mismatch, "all studies must share the same family");
  }
  StudyCollection sc;
  sc.studies = std::move(studies);
  return sc;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

char detect_delimiter(const std::string& line) {
  return line.find('\t') != std::string::npos ? '\t' : ',';
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, delim)) fields.push_back(trim(field));
  if (!line.empty() && line.back() == delim) fields.push_back("");
  return fields;
}

bool is_missing_token(const std::string& s) {
  if (s.empty()) return true;
  std::string up;
  up.reserve(s.size());
  for (char c : s) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return up == "NA" || up == "NAN" || up == "NULL";
}

double parse_value(const std::string& token, const std::string& where) {
  if (is_missing_token(token)) fail(errc::missing_value, "missing value at " + where);
  try {
    std::size_t pos = 0;
    double v = std::stod(token, &pos);
    if (pos != token.size()) fail(errc::bad_format, "malformed number '" + token + "' at " + where);
    if (!std::isfinite(v)) fail(errc::missing_value, "non-finite value at " + where);
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(errc::bad_format, "malformed number '" + token + "' at " + where);
  }
}

struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

Table read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::bad_format, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(errc::bad_format, "'" + path + "' is empty");
  char delim = detect_delimiter(line);

  Table t;
  t.header = split_fields(line, delim);
  if (t.header.empty()) fail(errc::bad_format, "'" + path + "' has an empty header row");

  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line, delim);
    if (fields.size() != t.header.size())
      fail(errc::dimension_mismatch, path + ":" + std::to_string(lineno) + ": expected " +
                                         std::to_string(t.header.size()) + " fields, got " +
                                         std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j)
      row[j] = parse_value(fields[j], path + ":" + std::to_string(lineno) + " column " +
                                          std::to_string(j + 1));
    rows.push_back(std::move(row));
  }

  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return t;
}

Eigen::VectorXd read_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::bad_format, "cannot open '" + path + "'");
  std::vector<double> values;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string tok = trim(line);
    if (tok.empty() && !values.empty() && in.eof()) break;
    values.push_back(parse_value(tok, path + ":" + std::to_string(lineno)));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

}  // namespace

NamedMatrix load_matrix(const std::string& path) {
  Table t = read_matrix(path);
  return {std::move(t.header), std::move(t.values)};
}

Dataset load_dataset(const std::string& x_path, const std::string& y_path,
                     const std::string& clvar_path, Family family) {
  Table xt = read_matrix(x_path);
  Eigen::VectorXd y = read_vector(y_path);
  Eigen::MatrixXd clvar(0, 0);
  if (!clvar_path.empty()) {
    Table ct = read_matrix(clvar_path);
    clvar = std::move(ct.values);
  }
  return make_dataset(std::move(xt.values), std::move(y), std::move(clvar), std::move(xt.header),
                      family);
}

void save_dataset(const Dataset& d, const std::string& x_path, const std::string& y_path,
                  const std::string& clvar_path) {
  {
    std::ofstream out(x_path);
    if (!out) fail(errc::bad_format, "cannot write '" + x_path + "'");
    for (int j = 0; j < d.p(); ++j) out << (j ? "," : "") << d.colnames[j];
    out << '\n';
    out.precision(17);
    for (int i = 0; i < d.n(); ++i) {
      for (int j = 0; j < d.p(); ++j) out << (j ? "," : "") << d.x(i, j);
      out << '\n';
    }
  }
  {
    std::ofstream out(y_path);
    if (!out) fail(errc::bad_format, "cannot write '" + y_path + "'");
    out.precision(17);
    for (int i = 0; i < d.n(); ++i) out << d.y[i] << '\n';
  }
  if (!clvar_path.empty() && d.q() > 0) {
    std::ofstream out(clvar_path);
    if (!out) fail(errc::bad_format, "cannot write '" + clvar_path + "'");
    for (int j = 0; j < d.q(); ++j) out << (j ? "," : "") << "clvar" << (j + 1);
    out << '\n';
    out.precision(17);
    for (int i = 0; i < d.n(); ++i) {
      for (int j = 0; j < d.q(); ++j) out << (j ? "," : "") << d.clvar(i, j);
      out << '\n';
    }
  }
}

namespace {

struct TwoColumns {
  std::vector<std::pair<std::string, std::string>> rows;
};

TwoColumns read_two_columns(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::bad_format, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(errc::bad_format, "'" + path + "' is empty");
  char delim = detect_delimiter(line);
  auto header = split_fields(line, delim);
  if (header.size() != 2)
    fail(errc::bad_format, "'" + path + "' must have exactly two columns (colname, value)");

  TwoColumns t;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line, delim);
    if (fields.size() != 2)
      fail(errc::bad_format, path + ":" + std::to_string(lineno) + ": expected 2 fields");
    t.rows.emplace_back(fields[0], fields[1]);
  }
  return t;
}

}  // namespace

PositionMap load_positions(const std::string& path) {
  TwoColumns t = read_two_columns(path);
  PositionMap pm;
  std::unordered_set<std::string> seen;
  for (const auto& [name, value] : t.rows) {
    if (!seen.insert(name).second)
      fail(errc::duplicate_colname, "column '" + name + "' listed twice in '" + path + "'");
    try {
      pm.entries.push_back({name, std::stoll(value)});
    } catch (const std::exception&) {
      fail(errc::bad_format, "malformed position '" + value + "' for column '" + name + "'");
    }
  }
  return pm;
}

BlockMap load_blocks(const std::string& path) {
  TwoColumns t = read_two_columns(path);
  BlockMap bm;
  for (const auto& [name, value] : t.rows) bm.entries.push_back({name, value});
  bm.index();  // validates uniqueness and non-empty labels
  return bm;
}

Dataset validate_columns(const Dataset& d, bool drop_degenerate, ValidationReport* report) {
  std::vector<int> keep;
  std::vector<std::string> dropped;
  for (int j = 0; j < d.p(); ++j) {
    const auto col = d.x.col(j);
    double mean = col.mean();
    double var = (col.array() - mean).square().sum();
    if (var <= 0.0) {
      if (!drop_degenerate)
        fail(errc::degenerate_column, "column '" + d.colnames[j] + "' has standard deviation zero");
      dropped.push_back(d.colnames[j]);
    } else {
      keep.push_back(j);
    }
  }
  if (report) report->dropped = dropped;
  if (dropped.empty()) return d;

  Eigen::MatrixXd x(d.n(), static_cast<Eigen::Index>(keep.size()));
  std::vector<std::string> names;
  names.reserve(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    x.col(static_cast<Eigen::Index>(k)) = d.x.col(keep[k]);
    names.push_back(d.colnames[keep[k]]);
  }
  return make_dataset(std::move(x), d.y, d.clvar, std::move(names), d.family);
}

}  // namespace snptree
