#include "pam/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

#include "pam/error.hpp"

namespace pam {

std::string_view to_string(BoundaryMode mode) {
  return mode == BoundaryMode::periodic ? "periodic" : "zero_dirichlet";
}

BoundaryMode parse_boundary_mode(std::string_view text) {
  if (text == "zero_dirichlet" || text == "dirichlet" || text == "zero-dirichlet")
    return BoundaryMode::zero_dirichlet;
  if (text == "periodic") return BoundaryMode::periodic;
  throw ConfigError("unknown boundary_mode '" + std::string(text) + "'");
}

std::string format_point(const Point& x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t k = 0; k < x.size(); ++k) os << (k ? "," : "") << x[k];
  os << ')';
  return os.str();
}

namespace {

std::size_t ipow(std::size_t base, int e) {
  std::size_t r = 1;
  for (int k = 0; k < e; ++k) r *= base;
  return r;
}

}  // namespace

Box::Box() : Box(1, 0) {}

Box::Box(int dim, int radius, BoundaryMode mode, Point center)
    : dim_(dim), radius_(radius), mode_(mode), center_(std::move(center)) {
  if (dim < 1) throw ConfigError("box dimension must be positive");
  if (radius < 0) throw ConfigError("box radius must be nonnegative");
  if (center_.empty()) center_.assign(static_cast<std::size_t>(dim), 0);
  if (static_cast<int>(center_.size()) != dim)
    throw ConfigError("box center has wrong dimension");
  const auto side = static_cast<std::size_t>(2 * radius + 1);
  size_ = ipow(side, dim);
  if (size_ > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()))
    throw ConfigError("box too large");

  auto table = std::make_shared<std::vector<std::int32_t>>(size_ * 2 * dim);
  std::vector<std::size_t> stride(dim);
  for (int k = 0; k < dim; ++k) stride[k] = ipow(side, dim - 1 - k);
  std::vector<std::size_t> coord(dim, 0);
  for (std::size_t i = 0; i < size_; ++i) {
    for (int k = 0; k < dim; ++k) {
      const std::size_t c = coord[k];
      std::int32_t up, down;
      if (c + 1 < side) {
        up = static_cast<std::int32_t>(i + stride[k]);
      } else {
        up = mode == BoundaryMode::periodic ? static_cast<std::int32_t>(i - c * stride[k])
                                            : kOutside;
      }
      if (c > 0) {
        down = static_cast<std::int32_t>(i - stride[k]);
      } else {
        down = mode == BoundaryMode::periodic
                   ? static_cast<std::int32_t>(i + (side - 1) * stride[k])
                   : kOutside;
      }
      (*table)[2 * dim * i + 2 * k] = up;
      (*table)[2 * dim * i + 2 * k + 1] = down;
    }
    for (int k = dim - 1; k >= 0; --k) {
      if (++coord[k] < side) break;
      coord[k] = 0;
    }
  }
  neighbors_ = std::move(table);
}

Point Box::offset(std::size_t index) const {
  Point x(dim_);
  const auto side = static_cast<std::size_t>(this->side());
  for (int k = dim_ - 1; k >= 0; --k) {
    x[k] = static_cast<int>(index % side) - radius_;
    index /= side;
  }
  return x;
}

Point Box::point(std::size_t index) const {
  Point x = offset(index);
  for (int k = 0; k < dim_; ++k) x[k] += center_[k];
  return x;
}

std::optional<std::size_t> Box::find(const Point& x) const {
  if (static_cast<int>(x.size()) != dim_) return std::nullopt;
  std::size_t index = 0;
  const auto side = static_cast<std::size_t>(this->side());
  for (int k = 0; k < dim_; ++k) {
    const int rel = x[k] - center_[k];
    if (rel < -radius_ || rel > radius_) return std::nullopt;
    index = index * side + static_cast<std::size_t>(rel + radius_);
  }
  return index;
}

std::size_t Box::index(const Point& x) const {
  if (auto i = find(x)) return *i;
  throw ConfigError("point " + format_point(x) + " lies outside the box");
}

std::optional<std::size_t> Box::find_offset(std::size_t from, const Point& offset) const {
  Point rel = this->offset(from);
  const int side = this->side();
  std::size_t index = 0;
  for (int k = 0; k < dim_; ++k) {
    int c = rel[k] + offset[k] + radius_;
    if (mode_ == BoundaryMode::periodic) {
      c %= side;
      if (c < 0) c += side;
    } else if (c < 0 || c >= side) {
      return std::nullopt;
    }
    index = index * static_cast<std::size_t>(side) + static_cast<std::size_t>(c);
  }
  return index;
}

int Box::distance(std::size_t a, std::size_t b) const {
  const Point pa = offset(a);
  const Point pb = offset(b);
  int dist = 0;
  for (int k = 0; k < dim_; ++k) {
    int delta = std::abs(pa[k] - pb[k]);
    if (mode_ == BoundaryMode::periodic) delta = std::min(delta, side() - delta);
    dist = std::max(dist, delta);
  }
  return dist;
}

bool Box::same_geometry(const Box& other) const noexcept {
  return dim_ == other.dim_ && radius_ == other.radius_ && mode_ == other.mode_ &&
         center_ == other.center_;
}

Field::Field(Box box, double fill) : box_(std::move(box)), values_(box_.size(), fill) {
  if (std::isnan(fill) || fill == std::numeric_limits<double>::infinity())
    throw ConfigError("field values must lie in [-inf, +inf)");
}

Field::Field(Box box, std::vector<double> values)
    : box_(std::move(box)), values_(std::move(values)) {
  if (values_.size() != box_.size())
    throw ConfigError("field size " + std::to_string(values_.size()) +
                      " does not match box size " + std::to_string(box_.size()));
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw ConfigError("field value at index " + std::to_string(i) +
                        " is not in [-inf, +inf)");
  }
}

bool Field::has_singular_sites() const noexcept {
  return std::any_of(values_.begin(), values_.end(), [](double v) { return v == kNegInf; });
}

Domain full_domain(const Box& box) {
  Domain d;
  d.box = box;
  d.sites.resize(box.size());
  std::iota(d.sites.begin(), d.sites.end(), std::size_t{0});
  d.local.resize(box.size());
  std::iota(d.local.begin(), d.local.end(), std::int64_t{0});
  auto table = box.neighbors();
  d.nbr.assign(table.begin(), table.end());
  return d;
}

Restriction restrict_domain(const Field& f) {
  Restriction r;
  Domain& d = r.domain;
  const Box& box = f.box();
  d.box = box;
  d.local.assign(box.size(), -1);
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (f[i] > kNegInf) {
      d.local[i] = static_cast<std::int64_t>(d.sites.size());
      d.sites.push_back(i);
      r.values.push_back(f[i]);
    }
  }
  const int slots = 2 * box.dim();
  d.nbr.resize(d.sites.size() * static_cast<std::size_t>(slots));
  for (std::size_t j = 0; j < d.sites.size(); ++j) {
    for (int s = 0; s < slots; ++s) {
      const std::int32_t y = box.neighbor(d.sites[j], s);
      d.nbr[j * slots + s] =
          y == Box::kOutside ? -1 : static_cast<std::int32_t>(d.local[static_cast<std::size_t>(y)]);
    }
  }
  return r;
}

std::vector<std::vector<std::size_t>> connected_components(const Domain& domain) {
  const std::size_t n = domain.size();
  const int slots = 2 * domain.dim();
  std::vector<int> label(n, -1);
  std::vector<std::vector<std::size_t>> components;
  for (std::size_t start = 0; start < n; ++start) {
    if (label[start] >= 0) continue;
    const int id = static_cast<int>(components.size());
    std::vector<std::size_t> members;
    std::queue<std::size_t> queue;
    queue.push(start);
    label[start] = id;
    while (!queue.empty()) {
      const std::size_t x = queue.front();
      queue.pop();
      members.push_back(x);
      for (int s = 0; s < slots; ++s) {
        const std::int32_t y = domain.nbr[x * slots + s];
        if (y >= 0 && label[static_cast<std::size_t>(y)] < 0) {
          label[static_cast<std::size_t>(y)] = id;
          queue.push(static_cast<std::size_t>(y));
        }
      }
    }
    std::sort(members.begin(), members.end());
    components.push_back(std::move(members));
  }
  return components;
}

void apply_operator(const Domain& domain, double kappa, std::span<const double> potential,
                    std::span<const double> x, std::span<double> y) {
  const std::size_t n = domain.size();
  const int slots = 2 * domain.dim();
  const std::int32_t* nbr = domain.nbr.data();
  const bool with_potential = !potential.empty();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = -static_cast<double>(slots) * x[i];
    const std::int32_t* row = nbr + i * slots;
    for (int s = 0; s < slots; ++s) {
      if (row[s] >= 0) acc += x[static_cast<std::size_t>(row[s])];
    }
    y[i] = kappa * acc + (with_potential ? potential[i] * x[i] : 0.0);
  }
}

Field apply_laplacian(const Field& f) {
  const Box& box = f.box();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] == kNegInf) throw SingularSiteError(i, format_point(box.point(i)));
  }
  const Domain domain = full_domain(box);
  std::vector<double> out(f.size());
  apply_operator(domain, 1.0, {}, f.values(), out);
  return Field(box, std::move(out));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Field embed(const Domain& domain, std::span<const double> local_values, double fill) {
  std::vector<double> values(domain.box.size(), fill);
  for (std::size_t j = 0; j < domain.size(); ++j) values[domain.sites[j]] = local_values[j];
  return Field(domain.box, std::move(values));
}

}  // namespace pam
