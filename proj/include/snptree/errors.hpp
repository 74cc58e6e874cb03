#pragma once

#include <stdexcept>
#include <string>

namespace snptree {

enum class errc {
  // data / validation
  missing_value,
  dimension_mismatch,
  non_binary_response,
  duplicate_colname,
  degenerate_column,
  zero_variance,
  duplicate_position,
  tree_dataset_mismatch,
  column_universe_mismatch,
  unknown_colname,
  bad_format,
  // numeric
  non_convergence,
  perfect_separation,
  degenerate_fit,
  negative_deviance,
  empty_input,
};

class Error : public std::runtime_error {
public:
  Error(errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  errc code() const noexcept { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

// True for conditions caused by bad input data rather than numerics.
inline bool is_data_error(errc c) {
  switch (c) {
    case errc::missing_value:
    case errc::dimension_mismatch:
    case errc::non_binary_response:
    case errc::duplicate_colname:
    case errc::degenerate_column:
    case errc::zero_variance:
    case errc::duplicate_position:
    case errc::tree_dataset_mismatch:
    case errc::column_universe_mismatch:
    case errc::unknown_colname:
    case errc::bad_format:
      return true;
    default:
      return false;
  }
}

}  // namespace snptree
