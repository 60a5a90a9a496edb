#pragma once

#include <string>
#include <vector>

namespace gsr::cli {

// Exit statuses, kept distinct so scripts can tell failure classes apart.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;       // bad flags or invalid configuration
inline constexpr int kExitNumerical = 3;   // solver or estimator failure
inline constexpr int kExitOracle = 4;      // simulation disagrees with the solver
inline constexpr int kExitPartial = 5;     // some table cells failed

// One line of the design-table CSV.  Failed cells keep their (gamma, mu) key
// and carry the "error" marker in every value column.
struct TableRow {
  double gamma = 0.0;
  double mu = 0.0;
  bool ok = false;
  double r_star = 0.0;
  double a_star = 0.0;
  double sadd = 0.0;
  double lower_bound = 0.0;
  double arl_achieved = 0.0;
  double gap = 0.0;
};

// Canonical CSV form: fixed header, keys with %g, values with two decimals,
// LF endings.  parse(format(rows)) == rows and format(parse(text)) == text.
std::string format_table_csv(const std::vector<TableRow>& rows);
std::vector<TableRow> parse_table_csv(const std::string& text);

// Entry point behind main(); returns the process exit status.
int run(int argc, char** argv);

}  // namespace gsr::cli
