#include "neurofuse/nn.hpp"

#include <string>

namespace neurofuse::nn {

void to_json(nlohmann::json& j, const Architecture& a) {
  j = nlohmann::json{{"input_len", a.input_len},         {"conv1_filters", a.conv1_filters},
                     {"conv1_kernel", a.conv1_kernel},   {"conv2_filters", a.conv2_filters},
                     {"conv2_kernel", a.conv2_kernel},   {"pool", a.pool},
                     {"dense_units", a.dense_units},     {"classes", a.classes}};
}

void from_json(const nlohmann::json& j, Architecture& a) {
  j.at("input_len").get_to(a.input_len);
  j.at("conv1_filters").get_to(a.conv1_filters);
  j.at("conv1_kernel").get_to(a.conv1_kernel);
  j.at("conv2_filters").get_to(a.conv2_filters);
  j.at("conv2_kernel").get_to(a.conv2_kernel);
  j.at("pool").get_to(a.pool);
  j.at("dense_units").get_to(a.dense_units);
  j.at("classes").get_to(a.classes);
}

ScalerStats scaler_fit(const RowMatrixXd& data, std::span<const Index> rows) {
  const Index n = rows.empty() ? data.rows() : static_cast<Index>(rows.size());
  if (n < 2) throw ValidationError("scaler fit needs at least 2 rows");
  auto row_at = [&](Index i) { return rows.empty() ? i : rows[static_cast<std::size_t>(i)]; };

  ScalerStats s;
  s.mean = Eigen::VectorXd::Zero(data.cols());
  for (Index i = 0; i < n; ++i) s.mean += data.row(row_at(i)).transpose();
  s.mean /= static_cast<double>(n);
  Eigen::VectorXd ss = Eigen::VectorXd::Zero(data.cols());
  for (Index i = 0; i < n; ++i) {
    ss += (data.row(row_at(i)).transpose() - s.mean).cwiseAbs2();
  }
  s.std = (ss / static_cast<double>(n)).cwiseSqrt();
  for (Index c = 0; c < s.std.size(); ++c) {
    if (!(s.std[c] > kStdFloor)) {
      s.std[c] = kStdFloor;
      s.floored_columns.push_back(c);
    }
  }
  if (!s.mean.allFinite() || !s.std.allFinite()) throw NumericalError("non-finite scaler statistics");
  return s;
}

RowMatrixXd scaler_transform(const RowMatrixXd& x, const ScalerStats& s) {
  if (x.cols() != s.mean.size()) {
    throw ValidationError("scaler width " + std::to_string(s.mean.size()) + " does not match input width " +
                          std::to_string(x.cols()));
  }
  return ((x.rowwise() - s.mean.transpose()).array().rowwise() / s.std.transpose().array()).matrix();
}

RowMatrixXd scaler_inverse_transform(const RowMatrixXd& x, const ScalerStats& s) {
  if (x.cols() != s.mean.size()) throw ValidationError("scaler width does not match input width");
  return ((x.array().rowwise() * s.std.transpose().array()).rowwise() + s.mean.transpose().array()).matrix();
}

}  // namespace neurofuse::nn
