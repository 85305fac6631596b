#pragma once
// File formats: CSV data ingestion/emission and the JSON model schema.
// Numeric fields round-trip bit-exactly (17 significant digit decimal
// serialization); writes are atomic (temp file + rename), so no command
// leaves partial output behind.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gstvar/errors.hpp"
#include "gstvar/stationarity.hpp"
#include "gstvar/types.hpp"
#include "gstvar/version.hpp"

namespace gstvar {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void atomic_write_text(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open " + tmp + " for writing");
    out << content;
    if (!out) throw ValidationError("write to " + tmp + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ValidationError("cannot rename " + tmp + " to " + path);
  }
}

// ---------------------------------------------------------------------------
// CSV data files: UTF-8, header row, optional leading "date" column carried
// as labels only, remaining columns numeric, no missing cells.
// ---------------------------------------------------------------------------

struct LoadedCsv {
  SeriesMatrix series;
  std::vector<std::string> headers;  // variable names, date column removed
  bool has_date = false;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

inline std::string strip(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline LoadedCsv read_data_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError(path + ": empty file");

  LoadedCsv out;
  auto header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::strip(h);
  if (header.empty()) throw ValidationError(path + ": line 1: no columns");
  size_t first_value_col = 0;
  if (header[0] == "date") {
    out.has_date = true;
    first_value_col = 1;
  }
  out.headers.assign(header.begin() + first_value_col, header.end());
  const size_t d = out.headers.size();
  if (d == 0) throw ValidationError(path + ": line 1: no numeric columns");

  std::vector<std::vector<double>> rows;
  std::vector<std::string> dates;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::strip(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != d + first_value_col)
      throw ValidationError(path + ": line " + std::to_string(line_no) +
                            ": expected " + std::to_string(d + first_value_col) +
                            " cells, found " + std::to_string(cells.size()));
    if (out.has_date) dates.push_back(detail::strip(cells[0]));
    std::vector<double> row(d);
    for (size_t c = 0; c < d; ++c) {
      const std::string cell = detail::strip(cells[c + first_value_col]);
      if (cell.empty())
        throw ValidationError(path + ": line " + std::to_string(line_no) +
                              ", column " + std::to_string(c + first_value_col + 1) +
                              ": missing cell");
      size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size() || !std::isfinite(v))
        throw ValidationError(path + ": line " + std::to_string(line_no) +
                              ", column " + std::to_string(c + first_value_col + 1) +
                              ": not a finite number: '" + cell + "'");
      row[c] = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(path + ": no data rows");

  out.series.values.resize(static_cast<int>(rows.size()), static_cast<int>(d));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < d; ++c)
      out.series.values(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
  out.series.timestamps = std::move(dates);
  out.series.validate();
  return out;
}

inline void write_data_csv(const std::string& path, const SeriesMatrix& series,
                           const std::vector<std::string>& headers) {
  const int rows = static_cast<int>(series.values.rows());
  const int d = static_cast<int>(series.values.cols());
  if (static_cast<int>(headers.size()) != d)
    throw DimensionMismatch("header count does not match column count");
  const bool with_dates = !series.timestamps.empty();
  std::ostringstream out;
  if (with_dates) out << "date,";
  for (int c = 0; c < d; ++c) out << headers[static_cast<size_t>(c)] << (c + 1 < d ? "," : "\n");
  for (int r = 0; r < rows; ++r) {
    if (with_dates) out << series.timestamps[static_cast<size_t>(r)] << ",";
    for (int c = 0; c < d; ++c)
      out << format_double(series.values(r, c)) << (c + 1 < d ? "," : "\n");
  }
  atomic_write_text(path, out.str());
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

struct FitMetadata {
  double loglik = 0.0;
  int T = 0;
  std::uint64_t seed = 0;
  std::optional<JsrCertificate> jsr;
  std::string tool_version = kVersion;
};

struct ModelFile {
  ParameterVector params;
  std::optional<FitMetadata> fit;
};

inline nlohmann::json model_to_json(const ModelFile& model) {
  const auto& params = model.params;
  params.validate();
  nlohmann::json j;
  j["schema_version"] = kModelSchemaVersion;
  j["order"] = {{"d", params.order.d}, {"p", params.order.p}, {"M", params.order.M}};
  nlohmann::json regimes = nlohmann::json::array();
  for (const auto& reg : params.regimes) {
    nlohmann::json r;
    r["phi0"] = std::vector<double>(reg.phi0.data(), reg.phi0.data() + reg.phi0.size());
    nlohmann::json ar = nlohmann::json::array();
    for (const auto& a : reg.ar_mats) {
      const VectorXd v = a.reshaped();  // column-major vec
      ar.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    }
    r["ar"] = ar;
    const VectorXd v = vech(reg.omega);
    r["omega_vech"] = std::vector<double>(v.data(), v.data() + v.size());
    regimes.push_back(std::move(r));
  }
  j["regimes"] = std::move(regimes);
  j["alphas"] = std::vector<double>(params.alphas.data(),
                                    params.alphas.data() + params.alphas.size());
  if (model.fit) {
    nlohmann::json f;
    f["loglik"] = model.fit->loglik;
    f["T"] = model.fit->T;
    f["seed"] = model.fit->seed;
    f["tool_version"] = model.fit->tool_version;
    if (model.fit->jsr) {
      const auto& c = *model.fit->jsr;
      f["jsr"] = {{"lower", c.lower},
                  {"upper", c.upper},
                  {"tolerance", c.tolerance_requested},
                  {"iterations", c.iterations},
                  {"products_explored", c.products_explored},
                  {"converged", c.converged}};
    }
    j["fit"] = std::move(f);
  }
  return j;
}

inline ModelFile model_from_json(const nlohmann::json& j) {
  ModelFile model;
  if (!j.contains("order"))
    throw ValidationError("model file: missing 'order'");
  ModelOrder order;
  order.d = j["order"].at("d").get<int>();
  order.p = j["order"].at("p").get<int>();
  order.M = j["order"].at("M").get<int>();
  order.validate();
  model.params.order = order;
  const auto& regimes = j.at("regimes");
  if (static_cast<int>(regimes.size()) != order.M)
    throw ValidationError("model file: regime count does not match M");
  for (const auto& r : regimes) {
    RegimeParameters reg;
    const auto phi0 = r.at("phi0").get<std::vector<double>>();
    if (static_cast<int>(phi0.size()) != order.d)
      throw ValidationError("model file: phi0 has wrong length");
    reg.phi0 = Eigen::Map<const VectorXd>(phi0.data(), order.d);
    const auto& ar = r.at("ar");
    if (static_cast<int>(ar.size()) != order.p)
      throw ValidationError("model file: regime must have p AR matrices");
    for (const auto& a : ar) {
      const auto v = a.get<std::vector<double>>();
      if (static_cast<int>(v.size()) != order.d * order.d)
        throw ValidationError("model file: AR vec has wrong length");
      reg.ar_mats.push_back(
          Eigen::Map<const MatrixXd>(v.data(), order.d, order.d));
    }
    const auto vech_vals = r.at("omega_vech").get<std::vector<double>>();
    reg.omega = unvech(Eigen::Map<const VectorXd>(
                           vech_vals.data(), static_cast<int>(vech_vals.size())),
                       order.d);
    model.params.regimes.push_back(std::move(reg));
  }
  const auto alphas = j.at("alphas").get<std::vector<double>>();
  if (static_cast<int>(alphas.size()) != order.M)
    throw ValidationError("model file: alphas has wrong length");
  model.params.alphas = Eigen::Map<const VectorXd>(alphas.data(), order.M);
  model.params.validate();

  if (j.contains("fit")) {
    FitMetadata meta;
    const auto& f = j["fit"];
    meta.loglik = f.value("loglik", 0.0);
    meta.T = f.value("T", 0);
    meta.seed = f.value("seed", std::uint64_t{0});
    meta.tool_version = f.value("tool_version", std::string{});
    if (f.contains("jsr")) {
      JsrCertificate c;
      c.lower = f["jsr"].value("lower", 0.0);
      c.upper = f["jsr"].value("upper", 0.0);
      c.tolerance_requested = f["jsr"].value("tolerance", 0.0);
      c.iterations = f["jsr"].value("iterations", 0L);
      c.products_explored = f["jsr"].value("products_explored", 0L);
      c.converged = f["jsr"].value("converged", false);
      meta.jsr = c;
    }
    model.fit = std::move(meta);
  }
  return model;
}

inline void write_model_json(const std::string& path, const ModelFile& model) {
  atomic_write_text(path, model_to_json(model).dump(2) + "\n");
}

inline ModelFile read_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": bad model file: " + e.what());
  }
}

}  // namespace gstvar
