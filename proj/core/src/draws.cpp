#include "brc/draws.hpp"

#include <algorithm>
#include <stdexcept>

#include "brc/config.hpp"
#include "brc/csv.hpp"

namespace brc {

int PosteriorDraws::divergences() const {
  return static_cast<int>(std::count(divergent.begin(), divergent.end(), static_cast<char>(1)));
}

Eigen::Index PosteriorDraws::output_index(const std::string& name) const {
  auto it = std::find(output_names.begin(), output_names.end(), name);
  if (it == output_names.end()) throw std::out_of_range("no output named '" + name + "'");
  return static_cast<Eigen::Index>(it - output_names.begin());
}

bool PosteriorDraws::has_output(const std::string& name) const {
  return std::find(output_names.begin(), output_names.end(), name) != output_names.end();
}

Eigen::VectorXd PosteriorDraws::output(const std::string& name) const { return outputs.col(output_index(name)); }

Eigen::MatrixXd PosteriorDraws::by_chain(Eigen::Index output_column) const {
  Eigen::MatrixXd out(iterations, chains);
  for (int c = 0; c < chains; ++c) {
    out.col(c) = outputs.col(output_column).segment(static_cast<Eigen::Index>(c) * iterations, iterations);
  }
  return out;
}

void PosteriorDraws::write_csv(std::ostream& out) const {
  std::vector<std::string> header = {"chain", "iteration"};
  header.insert(header.end(), output_names.begin(), output_names.end());
  out << csv::join(header) << '\n';
  for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
    out << (i / iterations + 1) << ',' << (i % iterations + 1);
    for (Eigen::Index j = 0; j < outputs.cols(); ++j) out << ',' << format_double(outputs(i, j));
    out << '\n';
  }
}

}  // namespace brc
