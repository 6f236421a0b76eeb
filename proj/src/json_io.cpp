#include "dhinf/json_io.hpp"

#include <cmath>

#include "dhinf/error.hpp"

namespace dhinf::json_io {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError(field, "expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  if (!j[0].is_array()) throw ParseError(field, "row 0 is not an array");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError(field, "row " + std::to_string(r) + " is ragged or not an array");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<size_t>(c)];
      if (!v.is_number())
        throw ParseError(field, "entry (" + std::to_string(r) + "," + std::to_string(c) +
                                    ") is not a number");
      const double x = v.get<double>();
      if (!std::isfinite(x))
        throw ParseError(field, "entry (" + std::to_string(r) + "," + std::to_string(c) +
                                    ") is not finite");
      m(r, c) = x;
    }
  }
  return m;
}

Eigen::MatrixXd matrix_from_json_or_zero(const json& j, const std::string& field,
                                         Eigen::Index rows, Eigen::Index cols) {
  if (j.is_array() && j.empty()) return Eigen::MatrixXd::Zero(rows, cols);
  Eigen::MatrixXd m = matrix_from_json(j, field);
  if (m.rows() != rows || m.cols() != cols)
    throw ParseError(field, "expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                                ", got " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()));
  return m;
}

double number_from_json(const json& j, const std::string& field) {
  if (!j.is_number()) throw ParseError(field, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw ParseError(field, "not finite");
  return x;
}

std::vector<double> vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError(field, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (size_t i = 0; i < j.size(); ++i)
    out.push_back(number_from_json(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

const json& require(const json& obj, const std::string& field) {
  if (!obj.is_object()) throw ParseError(field, "document is not a JSON object");
  auto it = obj.find(field);
  if (it == obj.end()) throw ParseError(field, "missing");
  return *it;
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("<document>", e.what());
  }
}

}  // namespace dhinf::json_io
