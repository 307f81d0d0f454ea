#include "countdfm/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "countdfm/errors.hpp"

namespace countdfm {

using nlohmann::json;

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t start = 0;
    while (start < cell.size() && cell[start] == ' ') ++start;
    cells.push_back(cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(i, c));
  j["data"] = std::move(data);
  return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw FormatError("model file: matrix payload size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[k++];
  return m;
}

json marginal_to_json(const MarginalSpec& spec) {
  json j;
  j["family"] = family_name(spec.family());
  j["params"] = spec.params();
  if (spec.family() == Family::NegBinomial) j["successes"] = spec.nb_successes();
  return j;
}

MarginalSpec marginal_from_json(const json& j) {
  const Family family = family_from_name(j.at("family").get<std::string>());
  const auto params = j.at("params").get<std::vector<double>>();
  switch (family) {
    case Family::Bernoulli: return MarginalSpec::bernoulli(params.at(0));
    case Family::Poisson: return MarginalSpec::poisson(params.at(0));
    case Family::NegBinomial:
      return MarginalSpec::neg_binomial(j.at("successes").get<int>(), params.at(0));
    case Family::Multinomial: return MarginalSpec::multinomial(params);
  }
  throw FormatError("model file: unknown marginal family");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

CountData load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_csv: cannot open " + path);
  CountData data;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("load_csv: missing header row in " + path);
  data.columns = split_line(line);
  const std::size_t d = data.columns.size();
  if (d == 0) throw FormatError("load_csv: empty header in " + path);

  std::vector<std::vector<int>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    if (cells.size() != d)
      throw FormatError("load_csv: row " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, expected " + std::to_string(d));
    std::vector<int> row(d);
    for (std::size_t i = 0; i < d; ++i) {
      std::size_t consumed = 0;
      int value = 0;
      try {
        value = std::stoi(cells[i], &consumed);
      } catch (const std::exception&) {
        consumed = 0;
      }
      if (consumed != cells[i].size() || cells[i].empty())
        throw FormatError("load_csv: non-integer cell at row " + std::to_string(line_no) +
                          ", column " + data.columns[i]);
      row[i] = value;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("load_csv: no data rows in " + path);

  data.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t i = 0; i < d; ++i)
      data.x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = rows[t][i];
  return data;
}

void save_csv(const std::string& path, const Eigen::MatrixXi& x,
              const std::vector<std::string>& columns) {
  std::ofstream out(path);
  if (!out) throw DataError("save_csv: cannot open " + path);
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    if (i) out << ',';
    out << (i < static_cast<Eigen::Index>(columns.size()) ? columns[static_cast<std::size_t>(i)]
                                                          : "x" + std::to_string(i + 1));
  }
  out << '\n';
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      if (i) out << ',';
      out << x(t, i);
    }
    out << '\n';
  }
}

void save_csv_real(const std::string& path, const Eigen::MatrixXd& m,
                   const std::vector<std::string>& columns) {
  std::ofstream out(path);
  if (!out) throw DataError("save_csv_real: cannot open " + path);
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    if (i) out << ',';
    out << (i < static_cast<Eigen::Index>(columns.size()) ? columns[static_cast<std::size_t>(i)]
                                                          : "v" + std::to_string(i + 1));
  }
  out << '\n';
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
      if (i) out << ',';
      out << format_double(m(t, i));
    }
    out << '\n';
  }
}

void write_report(const std::string& path, const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("write_report: cannot open " + path);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
}

void save_model(const std::string& path, const FittedModel& model) {
  json j;
  j["schema_version"] = 1;
  j["d"] = model.params.d();
  j["r"] = model.params.r();
  j["p"] = model.params.p();
  j["lambda"] = matrix_to_json(model.params.lambda);
  json psi = json::array();
  for (const auto& m : model.params.psi) psi.push_back(matrix_to_json(m));
  j["psi"] = std::move(psi);
  j["sigma_eps"] = matrix_to_json(model.params.sigma_eps);
  j["sigma_eta"] = matrix_to_json(model.params.sigma_eta);
  json marginals = json::array();
  for (const auto& spec : model.marginals) marginals.push_back(marginal_to_json(spec));
  j["marginals"] = std::move(marginals);
  json r_z = json::array();
  for (const auto& m : model.latent_acf.r_z) r_z.push_back(matrix_to_json(m));
  j["latent_acf"]["r_z"] = std::move(r_z);
  json sigma_y = json::array();
  for (const auto& m : model.latent_acf.sigma_y) sigma_y.push_back(matrix_to_json(m));
  j["latent_acf"]["sigma_y"] = std::move(sigma_y);
  j["psd_shift"] = model.psd_shift;
  j["observed_support"] = model.observed_support;

  std::ofstream out(path);
  if (!out) throw DataError("save_model: cannot open " + path);
  out << j.dump(2) << '\n';
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_model: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("load_model: " + std::string(e.what()));
  }
  if (j.value("schema_version", 0) != 1)
    throw FormatError("load_model: unsupported schema_version");

  FittedModel model;
  try {
    model.params.lambda = matrix_from_json(j.at("lambda"));
    for (const auto& m : j.at("psi")) model.params.psi.push_back(matrix_from_json(m));
    model.params.sigma_eps = matrix_from_json(j.at("sigma_eps"));
    model.params.sigma_eta = matrix_from_json(j.at("sigma_eta"));
    for (const auto& m : j.at("marginals")) model.marginals.push_back(marginal_from_json(m));
    for (const auto& m : j.at("latent_acf").at("r_z"))
      model.latent_acf.r_z.push_back(matrix_from_json(m));
    for (const auto& m : j.at("latent_acf").at("sigma_y"))
      model.latent_acf.sigma_y.push_back(matrix_from_json(m));
    model.psd_shift = j.at("psd_shift").get<double>();
    model.observed_support = j.at("observed_support").get<std::vector<std::vector<int>>>();
  } catch (const json::exception& e) {
    throw FormatError("load_model: " + std::string(e.what()));
  }
  model.latent_acf.z_scale = Eigen::VectorXd::Ones(model.params.d());
  return model;
}

}  // namespace countdfm
