#include "sasim/matrix_io.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace sasim {

Eigen::MatrixXd read_matrix(std::istream& in) {
  long rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows <= 0 || cols <= 0) {
    throw std::runtime_error("read_matrix: bad header (want \"rows cols\")");
  }
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) {
      if (!(in >> m(i, j))) {
        throw std::runtime_error("read_matrix: truncated at entry (" +
                                 std::to_string(i) + "," + std::to_string(j) +
                                 ")");
      }
    }
  }
  return m;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << m(i, j) << (j + 1 == m.cols() ? '\n' : ' ');
    }
  }
}

Eigen::MatrixXd read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_matrix(in);
}

void write_matrix_file(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_matrix(out, m);
}

}  // namespace sasim
