#pragma once

#include <Eigen/Dense>

#include <string>
#include <unordered_map>
#include <vector>

#include "snptree/errors.hpp"

namespace snptree {

enum class Family { gaussian, binomial };

Family family_from_string(const std::string& s);
std::string to_string(Family f);

// Immutable after construction; safe to share across threads.
// x holds the genotype/covariate design (SNP codings 0/1/2 stored as reals),
// clvar the optional control covariates (never penalized, never clustered).
struct Dataset {
  Eigen::MatrixXd x;                  // n x p
  Eigen::VectorXd y;                  // n
  Eigen::MatrixXd clvar;              // n x q, q == 0 when absent
  std::vector<std::string> colnames;  // p unique names for x columns
  Family family = Family::gaussian;

  int n() const { return static_cast<int>(x.rows()); }
  int p() const { return static_cast<int>(x.cols()); }
  int q() const { return static_cast<int>(clvar.cols()); }

  // Index of a named x column, -1 if absent.
  int col_index(const std::string& name) const;

private:
  mutable std::unordered_map<std::string, int> name_index_;
  friend Dataset make_dataset(Eigen::MatrixXd, Eigen::VectorXd, Eigen::MatrixXd,
                              std::vector<std::string>, Family);
};

// Validates all Dataset invariants (no NaN, unique colnames, binomial response
// in {0,1} with both classes present, n >= 8).
Dataset make_dataset(Eigen::MatrixXd x, Eigen::VectorXd y, Eigen::MatrixXd clvar,
                     std::vector<std::string> colnames, Family family);

struct PositionMap {
  struct Entry {
    std::string colname;
    long long position;
  };
  std::vector<Entry> entries;
};

struct BlockMap {
  struct Entry {
    std::string colname;
    std::string block;
  };
  std::vector<Entry> entries;

  // Block labels in order of first appearance.
  std::vector<std::string> block_order() const;
  // colname -> block label; throws on duplicate colnames.
  std::unordered_map<std::string, std::string> index() const;
};

// Ordered list of studies sharing a column universe. Order is meaningful.
struct StudyCollection {
  std::vector<Dataset> studies;

  int m() const { return static_cast<int>(studies.size()); }
  Family family() const;
  // Union of study colnames, in first-appearance order.
  std::vector<std::string> column_universe() const;
};

StudyCollection make_study_collection(std::vector<Dataset> studies);

struct NamedMatrix {
  std::vector<std::string> colnames;
  Eigen::MatrixXd values;
};

// Delimiter-separated text (comma or tab, auto-detected). x and clvar carry a
// header row of column names; y is one value per line.
NamedMatrix load_matrix(const std::string& path);
Dataset load_dataset(const std::string& x_path, const std::string& y_path,
                     const std::string& clvar_path, Family family);
void save_dataset(const Dataset& d, const std::string& x_path, const std::string& y_path,
                  const std::string& clvar_path);

// Two-column tables with a header row: colname,position / colname,block.
PositionMap load_positions(const std::string& path);
BlockMap load_blocks(const std::string& path);

struct ValidationReport {
  std::vector<std::string> dropped;  // zero-variance columns removed
};

// With drop_degenerate, removes zero-variance x columns and lists them in the
// report; otherwise any constant column is an error.
Dataset validate_columns(const Dataset& d, bool drop_degenerate,
                         ValidationReport* report = nullptr);

}  // namespace snptree
