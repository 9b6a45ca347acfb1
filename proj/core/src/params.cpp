#include "brc/params.hpp"

#include <cmath>
#include <stdexcept>

#include "brc/error.hpp"

namespace brc {

std::size_t ParamLayout::add(std::string name, Eigen::Index size, Transform transform) {
  if (size < 0) throw ConfigError("negative block size for '" + name + "'");
  if (by_name_.count(name)) throw ConfigError("duplicate parameter block '" + name + "'");
  const std::size_t index = blocks_.size();
  by_name_[name] = index;
  blocks_.push_back({std::move(name), dim_, size, transform, false});
  dim_ += size;
  return index;
}

std::size_t ParamLayout::add_scalar(std::string name, Transform transform) {
  const std::size_t index = add(std::move(name), 1, transform);
  blocks_[index].scalar = true;
  return index;
}

const ParamBlock& ParamLayout::block(const std::string& name) const { return blocks_[index_of(name)]; }

bool ParamLayout::has(const std::string& name) const { return by_name_.count(name) > 0; }

std::size_t ParamLayout::index_of(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::out_of_range("no parameter block '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamLayout::scalar_names() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(dim_));
  for (const auto& b : blocks_) {
    if (b.scalar) {
      out.push_back(b.name);
    } else {
      for (Eigen::Index i = 0; i < b.size; ++i) out.push_back(b.name + "[" + std::to_string(i + 1) + "]");
    }
  }
  return out;
}

Eigen::VectorXd ParamLayout::constrain(const Eigen::VectorXd& unconstrained) const {
  if (unconstrained.size() != dim_) throw ConfigError("parameter vector has wrong length");
  Eigen::VectorXd out = unconstrained;
  for (const auto& b : blocks_) {
    if (b.transform == Transform::log) out.segment(b.offset, b.size) = unconstrained.segment(b.offset, b.size).array().exp();
  }
  return out;
}

Eigen::VectorXd ParamLayout::unconstrain(const Eigen::VectorXd& constrained) const {
  if (constrained.size() != dim_) throw ConfigError("parameter vector has wrong length");
  Eigen::VectorXd out = constrained;
  for (const auto& b : blocks_) {
    if (b.transform == Transform::log) out.segment(b.offset, b.size) = constrained.segment(b.offset, b.size).array().log();
  }
  return out;
}

Eigen::VectorXd ParamLayout::pack(const std::map<std::string, Eigen::VectorXd>& values) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
  for (const auto& [name, v] : values) {
    const auto& b = block(name);
    if (v.size() != b.size) throw ConfigError("block '" + name + "' expects " + std::to_string(b.size) + " values");
    out.segment(b.offset, b.size) = b.transform == Transform::log ? Eigen::VectorXd(v.array().log()) : v;
  }
  return out;
}

std::map<std::string, Eigen::VectorXd> ParamLayout::unpack(const Eigen::VectorXd& unconstrained) const {
  const Eigen::VectorXd c = constrain(unconstrained);
  std::map<std::string, Eigen::VectorXd> out;
  for (const auto& b : blocks_) out[b.name] = c.segment(b.offset, b.size);
  return out;
}

ParamEval::ParamEval(const ParamLayout& layout, const Eigen::VectorXd& unconstrained)
    : layout_(layout), unconstrained_(unconstrained), constrained_(layout.constrain(unconstrained)),
      grad_(Eigen::VectorXd::Zero(layout.dim())) {}

double ParamEval::finish(Eigen::VectorXd* out) const {
  double lp = log_density;
  for (const auto& b : layout_.blocks()) {
    if (b.transform == Transform::log) lp += unconstrained_.segment(b.offset, b.size).sum();
  }
  if (out) {
    *out = grad_;
    for (const auto& b : layout_.blocks()) {
      if (b.transform != Transform::log) continue;
      out->segment(b.offset, b.size) =
          grad_.segment(b.offset, b.size).cwiseProduct(constrained_.segment(b.offset, b.size)).array() + 1.0;
    }
  }
  return lp;
}

}  // namespace brc
