#include "replica_sync/groups.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "replica_sync/errors.hpp"

namespace replica_sync {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  return t;
}

std::uint64_t factorial(int k) {
  std::uint64_t f = 1;
  for (int i = 2; i <= k; ++i) f *= static_cast<std::uint64_t>(i);
  return f;
}

}  // namespace

GroupSpec GroupSpec::sok(int k) {
  if (k < 2) fail(ErrorCode::InvalidInput, "SOk requires k >= 2");
  return {Family::SOk, k};
}

GroupSpec GroupSpec::cyclic(int k) {
  if (k < 2) fail(ErrorCode::InvalidInput, "Cyclic requires k >= 2");
  return {Family::Cyclic, k};
}

GroupSpec GroupSpec::symmetric(int k) {
  if (k < 2) fail(ErrorCode::InvalidInput, "Symmetric requires k >= 2");
  return {Family::Symmetric, k};
}

std::uint64_t GroupSpec::order() const {
  switch (family) {
    case Family::Cyclic:
      return static_cast<std::uint64_t>(parameter);
    case Family::Z2:
      return 2;
    case Family::Symmetric:
      if (parameter > 20)
        fail(ErrorCode::BudgetExceeded, "Symmetric order overflows");
      return factorial(parameter);
    default:
      fail(ErrorCode::NotEnumerable, "continuous family has no finite order");
  }
}

std::string GroupSpec::describe() const {
  switch (family) {
    case Family::SO2:
      return "SO(2)";
    case Family::SOk:
      return "SO(" + std::to_string(parameter) + ")";
    case Family::Cyclic:
      return "Cyclic(" + std::to_string(parameter) + ")";
    case Family::Symmetric:
      return "Symmetric(" + std::to_string(parameter) + ")";
    case Family::Z2:
      return "Z2";
  }
  return "?";
}

GroupElement::GroupElement(GroupSpec spec, Storage value)
    : spec_(spec), value_(std::move(value)) {
  switch (spec_.family) {
    case Family::SO2:
      if (!std::holds_alternative<double>(value_))
        fail(ErrorCode::InvalidInput, "SO2 element must be an angle");
      value_ = wrap_angle(std::get<double>(value_));
      break;
    case Family::Cyclic:
    case Family::Z2: {
      if (!std::holds_alternative<int>(value_))
        fail(ErrorCode::InvalidInput, "cyclic element must be a residue");
      const int k = spec_.parameter;
      int r = std::get<int>(value_) % k;
      if (r < 0) r += k;
      value_ = r;
      break;
    }
    case Family::SOk: {
      if (!std::holds_alternative<Eigen::MatrixXd>(value_))
        fail(ErrorCode::InvalidInput, "SOk element must be a matrix");
      const auto& m = std::get<Eigen::MatrixXd>(value_);
      if (m.rows() != spec_.parameter || m.cols() != spec_.parameter)
        fail(ErrorCode::InvalidInput, "SOk element has wrong size");
      break;
    }
    case Family::Symmetric: {
      if (!std::holds_alternative<std::vector<int>>(value_))
        fail(ErrorCode::InvalidInput, "symmetric element must be a permutation");
      const auto& p = std::get<std::vector<int>>(value_);
      if (static_cast<int>(p.size()) != spec_.parameter)
        fail(ErrorCode::InvalidInput, "permutation has wrong length");
      std::vector<bool> seen(p.size(), false);
      for (int v : p) {
        if (v < 0 || v >= static_cast<int>(p.size()) || seen[v])
          fail(ErrorCode::InvalidInput, "not a permutation");
        seen[v] = true;
      }
      break;
    }
  }
}

double GroupElement::angle() const {
  if (spec_.family != Family::SO2)
    fail(ErrorCode::InvalidInput, "angle() on non-SO2 element");
  return std::get<double>(value_);
}

int GroupElement::residue() const {
  if (spec_.family != Family::Cyclic && spec_.family != Family::Z2)
    fail(ErrorCode::InvalidInput, "residue() on non-cyclic element");
  return std::get<int>(value_);
}

const Eigen::MatrixXd& GroupElement::rotation() const {
  if (spec_.family != Family::SOk)
    fail(ErrorCode::InvalidInput, "rotation() on non-SOk element");
  return std::get<Eigen::MatrixXd>(value_);
}

const std::vector<int>& GroupElement::permutation() const {
  if (spec_.family != Family::Symmetric)
    fail(ErrorCode::InvalidInput, "permutation() on non-symmetric element");
  return std::get<std::vector<int>>(value_);
}

GroupElement GroupElement::multiply(const GroupElement& other) const {
  if (!(spec_ == other.spec_))
    fail(ErrorCode::InvalidInput, "multiply: mismatched groups");
  switch (spec_.family) {
    case Family::SO2:
      return {spec_, angle() + other.angle()};
    case Family::Cyclic:
    case Family::Z2:
      return {spec_, residue() + other.residue()};
    case Family::SOk:
      return {spec_, Eigen::MatrixXd(rotation() * other.rotation())};
    case Family::Symmetric: {
      // (g·h)(i) = g(h(i))
      const auto& g = permutation();
      const auto& h = other.permutation();
      std::vector<int> out(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[h[i]];
      return {spec_, std::move(out)};
    }
  }
  fail(ErrorCode::Internal, "multiply: unknown family");
}

GroupElement GroupElement::inverse() const {
  switch (spec_.family) {
    case Family::SO2:
      return {spec_, -angle()};
    case Family::Cyclic:
    case Family::Z2:
      return {spec_, spec_.parameter - residue()};
    case Family::SOk:
      return {spec_, Eigen::MatrixXd(rotation().transpose())};
    case Family::Symmetric: {
      const auto& g = permutation();
      std::vector<int> out(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) out[g[i]] = static_cast<int>(i);
      return {spec_, std::move(out)};
    }
  }
  fail(ErrorCode::Internal, "inverse: unknown family");
}

bool GroupElement::approx_equal(const GroupElement& other, double tol) const {
  if (!(spec_ == other.spec_)) return false;
  switch (spec_.family) {
    case Family::SO2: {
      double d = std::abs(angle() - other.angle());
      d = std::min(d, kTwoPi - d);
      return d <= tol;
    }
    case Family::Cyclic:
    case Family::Z2:
      return residue() == other.residue();
    case Family::SOk:
      return (rotation() - other.rotation()).cwiseAbs().maxCoeff() <= tol;
    case Family::Symmetric:
      return permutation() == other.permutation();
  }
  return false;
}

GroupElement identity_element(const GroupSpec& spec) {
  switch (spec.family) {
    case Family::SO2:
      return {spec, 0.0};
    case Family::Cyclic:
    case Family::Z2:
      return {spec, 0};
    case Family::SOk:
      return {spec, Eigen::MatrixXd(
                        Eigen::MatrixXd::Identity(spec.parameter, spec.parameter))};
    case Family::Symmetric: {
      std::vector<int> id(spec.parameter);
      std::iota(id.begin(), id.end(), 0);
      return {spec, std::move(id)};
    }
  }
  fail(ErrorCode::Internal, "identity: unknown family");
}

GroupElement haar_sample(const GroupSpec& spec, Rng& rng) {
  switch (spec.family) {
    case Family::SO2:
      return {spec, rng.uniform(0.0, kTwoPi)};
    case Family::Cyclic:
    case Family::Z2:
      return {spec, static_cast<int>(rng.below(spec.parameter))};
    case Family::SOk: {
      const int k = spec.parameter;
      Eigen::MatrixXd a(k, k);
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) a(i, j) = rng.normal();
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
      Eigen::MatrixXd q = qr.householderQ();
      const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
      for (int j = 0; j < k; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
      if (q.determinant() < 0.0) q.col(0) = -q.col(0);
      return {spec, std::move(q)};
    }
    case Family::Symmetric: {
      std::vector<int> p(spec.parameter);
      std::iota(p.begin(), p.end(), 0);
      for (int i = spec.parameter - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.below(i + 1));
        std::swap(p[i], p[j]);
      }
      return {spec, std::move(p)};
    }
  }
  fail(ErrorCode::Internal, "haar_sample: unknown family");
}

std::vector<GroupElement> enumerate_elements(const GroupSpec& spec) {
  if (!spec.finite())
    fail(ErrorCode::NotEnumerable,
         spec.describe() + " is continuous and cannot be enumerated");
  const std::uint64_t n = spec.order();
  if (n > 1000000)
    fail(ErrorCode::BudgetExceeded, "group order exceeds enumeration budget");
  std::vector<GroupElement> out;
  out.reserve(n);
  if (spec.family == Family::Symmetric) {
    std::vector<int> p(spec.parameter);
    std::iota(p.begin(), p.end(), 0);
    do {
      out.emplace_back(spec, p);
    } while (std::next_permutation(p.begin(), p.end()));
  } else {
    for (int r = 0; r < spec.parameter; ++r) out.emplace_back(spec, r);
  }
  return out;
}

}  // namespace replica_sync
