// Fit a Gaussian to a handful of first-JND annotations, print the empirical
// and fitted SUR curves, and read off the 75% JND point.
//
//   sur_curve_sample [annotations.csv]

#include <fstream>
#include <iomanip>
#include <iostream>

#include "surjnd/sur_model.hpp"

using namespace surjnd;

int main(int argc, char** argv) {
  JndAnnotationSet a;
  if (argc > 1) {
    std::ifstream in(argv[1]);
    if (!in) {
      std::cerr << "cannot open " << argv[1] << '\n';
      return 2;
    }
    auto sets = load_annotations(in);
    if (sets.empty()) return 3;
    a = sets.begin()->second;
  } else {
    a.source_id = "demo";
    const int jnd[] = {22, 24, 25, 25, 26, 27, 27, 27, 28, 28, 29, 30, 31, 33};
    for (int j : jnd) {
      a.subject_ids.push_back("s" + std::to_string(a.first_jnd.size()));
      a.first_jnd.push_back(j);
    }
  }

  try {
    const auto model = fit_gaussian(a);
    const auto grid = qp_grid(16, 40, 2);
    const auto empirical = empirical_curve(a, grid);
    const auto fitted = gaussian_curve(model, grid);

    std::cout << a.source_id << ": mean " << model.mean << ", std " << model.std << "\n\n";
    std::cout << "  qp  empirical  gaussian\n" << std::fixed << std::setprecision(3);
    for (std::size_t i = 0; i < grid.size(); ++i)
      std::cout << std::setw(4) << grid[i] << std::setw(11) << empirical.values()[i] << std::setw(10)
                << fitted.values()[i] << '\n';

    const auto j = jnd_point(gaussian_curve(model, qp_grid()));
    std::cout << "\nJND (SUR = 0.75): ";
    if (j) std::cout << *j << " (closed form " << gaussian_jnd(model) << ")\n";
    else std::cout << "beyond qp 51\n";
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code(e.kind());
  }
  return 0;
}
