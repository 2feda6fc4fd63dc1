#pragma once

// Finite boxes of Z^d, fields on them, and the discrete Laplacian
//   (Delta f)(x) = sum_{|y-x|=1} [f(y) - f(x)].
//
// Sites are indexed row-major over center + [-R, R]^d with axis 0 slowest,
// so index = sum_k (x_k - c_k + R) * (2R+1)^(d-1-k).

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pam {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class BoundaryMode { zero_dirichlet, periodic };

std::string_view to_string(BoundaryMode mode);
BoundaryMode parse_boundary_mode(std::string_view text);

using Point = std::vector<int>;

std::string format_point(const Point& x);

class Box {
 public:
  static constexpr std::int32_t kOutside = -1;

  Box();
  Box(int dim, int radius, BoundaryMode mode = BoundaryMode::zero_dirichlet,
      Point center = {});

  int dim() const noexcept { return dim_; }
  int radius() const noexcept { return radius_; }
  int side() const noexcept { return 2 * radius_ + 1; }
  std::size_t size() const noexcept { return size_; }
  BoundaryMode boundary() const noexcept { return mode_; }
  const Point& center() const noexcept { return center_; }

  Point point(std::size_t index) const;
  // Coordinates relative to the center, each in [-R, R].
  Point offset(std::size_t index) const;
  std::optional<std::size_t> find(const Point& x) const;
  std::size_t index(const Point& x) const;  // throws ConfigError when outside
  bool contains(const Point& x) const { return find(x).has_value(); }
  std::size_t center_index() const noexcept { return size_ / 2; }
  // Index of center + offset, or nullopt; periodic boxes wrap.
  std::optional<std::size_t> find_offset(std::size_t from, const Point& offset) const;

  // Entry [2d*i + 2k] is the +e_k neighbour of site i, [2d*i + 2k + 1] the
  // -e_k neighbour. Periodic boxes wrap; zero-Dirichlet boxes use kOutside.
  std::span<const std::int32_t> neighbors() const noexcept { return *neighbors_; }
  std::int32_t neighbor(std::size_t i, int slot) const noexcept {
    return (*neighbors_)[static_cast<std::size_t>(2 * dim_) * i + static_cast<std::size_t>(slot)];
  }
  // Sup-norm distance between two sites (periodic boxes use the wrapped
  // distance).
  int distance(std::size_t a, std::size_t b) const;

  bool same_geometry(const Box& other) const noexcept;

 private:
  int dim_;
  int radius_;
  BoundaryMode mode_;
  Point center_;
  std::size_t size_;
  std::shared_ptr<const std::vector<std::int32_t>> neighbors_;
};

// Real-valued function on a box with values in [-inf, +inf).
class Field {
 public:
  Field() = default;
  explicit Field(Box box, double fill = 0.0);
  Field(Box box, std::vector<double> values);

  const Box& box() const noexcept { return box_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> mutable_values() noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double at(const Point& x) const { return values_[box_.index(x)]; }

  bool has_singular_sites() const noexcept;

 private:
  Box box_;
  std::vector<double> values_;
};

// Sites where a field is finite, with a local neighbour table. Operators on
// a domain use the zero condition at every site outside it.
struct Domain {
  Box box;
  std::vector<std::size_t> sites;     // box indices, ascending
  std::vector<std::int64_t> local;    // box index -> local index, or -1
  std::vector<std::int32_t> nbr;      // size 2d * sites.size(); -1 = outside

  std::size_t size() const noexcept { return sites.size(); }
  bool empty() const noexcept { return sites.empty(); }
  int dim() const noexcept { return box.dim(); }
};

struct Restriction {
  Domain domain;
  std::vector<double> values;  // field values on domain.sites
};

Domain full_domain(const Box& box);
Restriction restrict_domain(const Field& f);

// Connected components of the domain (local indices), ordered by their
// smallest box index.
std::vector<std::vector<std::size_t>> connected_components(const Domain& domain);

// y = kappa * Delta x + potential .* x on the domain; potential may be empty.
void apply_operator(const Domain& domain, double kappa, std::span<const double> potential,
                    std::span<const double> x, std::span<double> y);

// Delta f with the box's boundary mode. Throws SingularSiteError on -inf.
Field apply_laplacian(const Field& f);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// Embeds domain-local values into a box-wide field, filling the rest.
Field embed(const Domain& domain, std::span<const double> local_values, double fill);

}  // namespace pam
