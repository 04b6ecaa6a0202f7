#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "replica_sync/rng.hpp"

namespace replica_sync {

enum class Family { SO2, SOk, Cyclic, Symmetric, Z2 };

/// A compact group family plus its integer parameter where applicable.
/// Z2 is Cyclic(2) specialized to the one-dimensional ±1 channel; its
/// elements are residues mod 2.
struct GroupSpec {
  Family family = Family::SO2;
  int parameter = 0;  // k for SOk/Cyclic/Symmetric; 2 for Z2; unused for SO2

  static GroupSpec so2() { return {Family::SO2, 0}; }
  static GroupSpec sok(int k);
  static GroupSpec cyclic(int k);
  static GroupSpec symmetric(int k);
  static GroupSpec z2() { return {Family::Z2, 2}; }

  bool finite() const {
    return family == Family::Cyclic || family == Family::Symmetric ||
           family == Family::Z2;
  }
  /// Group order; throws NotEnumerable for continuous families.
  std::uint64_t order() const;
  bool abelian() const { return family != Family::Symmetric && family != Family::SOk; }
  bool operator==(const GroupSpec&) const = default;
  std::string describe() const;
};

/// One group element, tagged with the spec it belongs to. Continuous
/// parameterizations: SO2 stores the angle in [0, 2π); SOk stores the
/// rotation matrix. Finite families store a residue or a permutation
/// (one-line notation, perm[i] = image of i).
class GroupElement {
 public:
  using Storage = std::variant<double, int, Eigen::MatrixXd, std::vector<int>>;

  GroupElement(GroupSpec spec, Storage value);

  const GroupSpec& spec() const { return spec_; }
  double angle() const;                      // SO2
  int residue() const;                       // Cyclic / Z2
  const Eigen::MatrixXd& rotation() const;   // SOk
  const std::vector<int>& permutation() const;  // Symmetric

  GroupElement multiply(const GroupElement& other) const;
  GroupElement inverse() const;
  /// Tolerance 1e-9 on the canonical parameterization for continuous
  /// families; exact for finite ones.
  bool approx_equal(const GroupElement& other, double tol = 1e-9) const;

 private:
  GroupSpec spec_;
  Storage value_;
};

GroupElement identity_element(const GroupSpec& spec);

/// Exact Haar sample: uniform angle for SO2, uniform residue/permutation for
/// finite families, and for SOk the QR of an i.i.d. Gaussian matrix with the
/// diagonal of R forced positive, then the first column negated if det = -1.
GroupElement haar_sample(const GroupSpec& spec, Rng& rng);

/// All elements of a finite family, each exactly once, in deterministic
/// order (residue order; lexicographic for permutations). Throws
/// NotEnumerable for continuous families and BudgetExceeded above 10^6
/// elements.
std::vector<GroupElement> enumerate_elements(const GroupSpec& spec);

}  // namespace replica_sync
