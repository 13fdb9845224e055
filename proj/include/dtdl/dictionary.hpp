#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <numeric>
#include <vector>

#include "dtdl/error.hpp"

namespace dtdl {

/// d x N matrix of atoms, partitioned column-wise into L per-device blocks.
struct Dictionary {
  Eigen::MatrixXd D;
  std::vector<Eigen::Index> per_device_atoms;

  Dictionary() = default;
  Dictionary(Eigen::MatrixXd d, std::vector<Eigen::Index> atoms) : D(std::move(d)), per_device_atoms(std::move(atoms)) {
    check();
  }

  Eigen::Index d() const { return D.rows(); }
  Eigen::Index N() const { return D.cols(); }
  std::size_t L() const { return per_device_atoms.size(); }

  Eigen::Index offset(std::size_t i) const {
    return std::accumulate(per_device_atoms.begin(), per_device_atoms.begin() + static_cast<std::ptrdiff_t>(i),
                           Eigen::Index{0});
  }
  Eigen::Index atoms(std::size_t i) const { return per_device_atoms[i]; }

  auto block(std::size_t i) { return D.middleCols(offset(i), per_device_atoms[i]); }
  auto block(std::size_t i) const { return D.middleCols(offset(i), per_device_atoms[i]); }

  void check() const {
    const Eigen::Index total = std::accumulate(per_device_atoms.begin(), per_device_atoms.end(), Eigen::Index{0});
    if (total != D.cols()) throw DataError("dictionary: per-device atom counts do not sum to N");
  }
};

}  // namespace dtdl
