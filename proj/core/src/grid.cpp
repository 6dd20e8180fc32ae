#include <cmath>

#include "bmech/quantize.hpp"

namespace bmech {

Axis Axis::over(double min, double max, int M, bool periodic) {
  if (M < 3) throw ShapeMismatch("grid axes need at least 3 points");
  if (!(min < max)) throw ShapeMismatch("grid axis needs min < max");
  Axis a;
  a.min = min;
  a.M = M;
  a.periodic = periodic;
  a.h = periodic ? (max - min) / M : (max - min) / (M - 1);
  return a;
}

Grid::Grid(std::vector<Axis> axes) : axes_(std::move(axes)) {
  strides_.assign(axes_.size(), 1);
  size_ = 1;
  for (int d = dim() - 1; d >= 0; --d) {
    if (axes_[d].M < 3) throw ShapeMismatch("grid axes need at least 3 points");
    strides_[d] = size_;
    size_ *= axes_[d].M;
  }
}

Grid Grid::from_domain(const std::vector<DomainInterval>& domain, int M) {
  std::vector<Axis> axes;
  for (const auto& d : domain) axes.push_back(Axis::over(d.min, d.max, M, d.periodic));
  return Grid(std::move(axes));
}

Grid Grid::product(const Grid& a, const Grid& b) {
  std::vector<Axis> axes = a.axes_;
  axes.insert(axes.end(), b.axes_.begin(), b.axes_.end());
  return Grid(std::move(axes));
}

double Grid::cell_volume() const {
  double v = 1.0;
  for (const auto& a : axes_) v *= a.h;
  return v;
}

ChartPoint Grid::point(int flat) const {
  ChartPoint x(dim());
  for (int d = 0; d < dim(); ++d) x[d] = axes_[d].coord(coordinate_index(flat, d));
  return x;
}

bool Grid::operator==(const Grid& o) const {
  if (dim() != o.dim()) return false;
  for (int d = 0; d < dim(); ++d) {
    const Axis &a = axes_[d], &b = o.axes_[d];
    if (a.M != b.M || a.periodic != b.periodic || a.min != b.min || a.h != b.h) return false;
  }
  return true;
}

DensityField DensityField::sample(const Grid& grid, const std::function<cplx(const ChartPoint&)>& f, cplx weight) {
  DensityField d{grid, Eigen::VectorXcd(grid.size()), weight};
  for (int j = 0; j < grid.size(); ++j) d.values[j] = f(grid.point(j));
  return d;
}

cplx pairing(const DensityField& psi, const DensityField& phi) {
  if (!(psi.grid == phi.grid)) throw ShapeMismatch("densities live on different grids");
  if (std::abs(std::conj(psi.weight) + phi.weight - cplx(1.0)) > 1e-12)
    throw WeightMismatch("pairing needs conj(weight) + weight = 1");
  return psi.values.dot(phi.values);
}

DensityField GridOperator::apply(const DensityField& psi) const {
  if (!(psi.grid == grid)) throw ShapeMismatch("operator and density live on different grids");
  if (weight && std::abs(*weight - psi.weight) > 1e-12)
    throw WeightMismatch("operator acts on densities of a different weight");
  return DensityField{grid, matrix * psi.values, psi.weight};
}

GridOperator compose(const GridOperator& a, const GridOperator& b) {
  if (!(a.grid == b.grid)) throw ShapeMismatch("operators live on different grids");
  if (a.weight && b.weight && std::abs(*a.weight - *b.weight) > 1e-12)
    throw WeightMismatch("composing operators of different weight");
  return GridOperator{a.grid, a.matrix * b.matrix, a.weight ? a.weight : b.weight};
}

GridOperator commutator(const GridOperator& a, const GridOperator& b) {
  GridOperator ab = compose(a, b);
  ab.matrix -= b.matrix * a.matrix;
  return ab;
}

}  // namespace bmech
