#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>

namespace sasim {

// Plain-text matrix format shared by every file interface in this project:
// first line "rows cols", then whitespace-separated decimal entries in
// row-major order. Pmfs are written as 1 x n matrices.

Eigen::MatrixXd read_matrix(std::istream& in);
void write_matrix(std::ostream& out, const Eigen::MatrixXd& m);

Eigen::MatrixXd read_matrix_file(const std::string& path);
void write_matrix_file(const std::string& path, const Eigen::MatrixXd& m);

}  // namespace sasim
