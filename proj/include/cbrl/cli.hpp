#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "cbrl/model.hpp"
#include "cbrl/optimize.hpp"

namespace cbrl {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitSolver = 3;

/**
Reads the dataset CSV: header `context,x1,...,xd,y`, one sample per row.
Context labels are integers (remapped to 1..K in ascending order). Errors
name `source` and the 1-based line number.
*/
Dataset read_dataset_csv(std::istream& in, const std::string& source = "<input>");
Dataset read_dataset_csv_file(const std::string& path);

/// Writes the CSV format above using the original context labels.
void write_dataset_csv(std::ostream& out, const Dataset& data);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// FitResult fields as JSON; nonfinite numbers become null.
nlohmann::json fit_result_json(const FitResult& fit);

/**
Runs one command line (`argv[0]` is the program name). Commands: fit,
solve-inner, coverage, experiment, gen. Each command resolves its settings
from defaults, then an optional `--config` file (either a bare config or a
previous output carrying a "config" member), then explicit flags, and embeds
the resolved config in what it writes. Returns kExitOk, kExitInput or
kExitSolver.
*/
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace cbrl
