#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "countdfm/estimation.hpp"

namespace countdfm {

struct CountData {
  Eigen::MatrixXi x;
  std::vector<std::string> columns;
};

// CSV data files: one header row of column names, then one row per time point
// of integer cells.
CountData load_csv(const std::string& path);
void save_csv(const std::string& path, const Eigen::MatrixXi& x,
              const std::vector<std::string>& columns = {});
void save_csv_real(const std::string& path, const Eigen::MatrixXd& m,
                   const std::vector<std::string>& columns);

/// Writes rows of preformatted cells with a header; the shared formatter for
/// every report the experiment runners emit.
void write_report(const std::string& path, const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows);

/// Fixed 6-significant-digit rendering used in all CSV output.
std::string format_double(double v);

// Versioned JSON model files (schema_version 1, matrices row-major).
void save_model(const std::string& path, const FittedModel& model);
FittedModel load_model(const std::string& path);

}  // namespace countdfm
