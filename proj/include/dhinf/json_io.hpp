#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace dhinf::json_io {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m);

/// Parses a row-major array of arrays of finite numbers. `field` names the
/// offending key in the ParseError message.
Eigen::MatrixXd matrix_from_json(const json& j, const std::string& field);

/// Like matrix_from_json but accepts an empty array `[]` as an r x c zero
/// matrix when the expected shape is known.
Eigen::MatrixXd matrix_from_json_or_zero(const json& j, const std::string& field,
                                         Eigen::Index rows, Eigen::Index cols);

double number_from_json(const json& j, const std::string& field);
std::vector<double> vector_from_json(const json& j, const std::string& field);

const json& require(const json& obj, const std::string& field);

json parse(const std::string& text);

}  // namespace dhinf::json_io
