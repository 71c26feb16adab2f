#include "exergm/terms.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace exergm {

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

int popcount(NodeMask m) { return std::popcount(static_cast<unsigned>(m)); }

double apply_transform(Transform t, double arg, double v, const std::string& name) {
  switch (t) {
    case Transform::identity:
      return v;
    case Transform::sqrt:
      if (v < 0) throw std::domain_error("sqrt of negative value in term " + name);
      return std::sqrt(v);
    case Transform::log:
      if (v <= 0) throw std::domain_error("log of non-positive value in term " + name);
      return std::log(v);
    case Transform::power: {
      const double r = std::pow(v, arg);
      if (!std::isfinite(r)) throw std::domain_error("non-finite power in term " + name);
      return r;
    }
    case Transform::scale:
      return v * arg;
  }
  return v;
}

double interaction_multiplier(const TermSpec& t, int n) {
  switch (t.interaction) {
    case Interaction::none:
      return 1.0;
    case Interaction::size_indicator:
      return n == t.size_k ? 1.0 : 0.0;
    case Interaction::log_inverse_size:
      return std::log(1.0 / n);
  }
  return 1.0;
}

}  // namespace

const char* base_name(BaseStat base) {
  switch (base) {
    case BaseStat::edges: return "edges";
    case BaseStat::mutual: return "mutual";
    case BaseStat::ttriad: return "ttriad";
    case BaseStat::nodematch: return "nodematch";
    case BaseStat::nodeicov: return "nodeicov";
    case BaseStat::nodeocov: return "nodeocov";
    case BaseStat::fourcycle: return "fourcycle";
  }
  return "?";
}

bool base_needs_attribute(BaseStat base) {
  return base == BaseStat::nodematch || base == BaseStat::nodeicov ||
         base == BaseStat::nodeocov;
}

std::string TermSpec::display_name() const {
  std::string s = base_name(base);
  if (base_needs_attribute(base)) s += "(" + attribute + ")";
  switch (transform) {
    case Transform::identity: break;
    case Transform::sqrt: s = "sqrt(" + s + ")"; break;
    case Transform::log: s = "log(" + s + ")"; break;
    case Transform::power: s = "pow(" + s + ", " + format_number(transform_arg) + ")"; break;
    case Transform::scale: s = "scale(" + s + ", " + format_number(transform_arg) + ")"; break;
  }
  switch (interaction) {
    case Interaction::none: break;
    case Interaction::size_indicator: s += " * I(n == " + std::to_string(size_k) + ")"; break;
    case Interaction::log_inverse_size: s += " * log(1/n)"; break;
  }
  return s;
}

std::string OffsetSpec::display_name() const {
  if (kind == Kind::term) return "offset(" + term.display_name() + ")";
  return "constraint(" + term.display_name() +
         (op == ConstraintOp::at_least ? " >= " : " <= ") + format_number(bound) + ")";
}

std::vector<std::string> ModelSpec::term_names() const {
  std::vector<std::string> out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.push_back(t.display_name());
  return out;
}

void ModelSpec::validate() const {
  if (terms.empty()) throw std::invalid_argument("model has no free terms");
  std::set<std::string> seen;
  for (const auto& t : terms) {
    if (!seen.insert(t.display_name()).second) {
      throw std::invalid_argument("duplicate term '" + t.display_name() + "'");
    }
  }
}

ModelEvaluator::ModelEvaluator(const ModelSpec& model, const AttributeTable& attrs,
                               int n, bool directed)
    : n_(n), directed_(directed) {
  check_size(n, directed);
  if (attrs.n() != n && !attrs.values().empty()) {
    throw std::invalid_argument("attribute table has " + std::to_string(attrs.n()) +
                                " nodes, network has " + std::to_string(n));
  }
  std::vector<std::string> slot_names;
  auto compile = [&](const TermSpec& t) {
    Compiled c{t.base, -1, t.transform, t.transform_arg, interaction_multiplier(t, n),
               t.display_name()};
    if (!directed && (t.base == BaseStat::mutual || t.base == BaseStat::nodeicov ||
                      t.base == BaseStat::nodeocov)) {
      throw std::invalid_argument(std::string("term '") + base_name(t.base) +
                                  "' is only defined for directed networks");
    }
    if (base_needs_attribute(t.base)) {
      const auto& values = attrs.get(t.attribute);
      for (std::size_t s = 0; s < slot_names.size(); ++s) {
        if (slot_names[s] == t.attribute) c.attr_slot = static_cast<int>(s);
      }
      if (c.attr_slot < 0) {
        c.attr_slot = static_cast<int>(slot_names.size());
        slot_names.push_back(t.attribute);
        attr_values_.push_back(values);
        std::array<NodeMask, kMaxUndirectedNodes> same{};
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            if (i != j && values[i] == values[j]) same[i] |= NodeMask(1u << j);
          }
        }
        same_masks_.push_back(same);
      }
    }
    return c;
  };
  for (const auto& t : model.terms) terms_.push_back(compile(t));
  for (const auto& o : model.offsets) {
    if (o.kind == OffsetSpec::Kind::term) {
      offset_terms_.push_back(compile(o.term));
    } else {
      constraints_.push_back({compile(o.term), o.op, o.bound});
    }
  }
}

double ModelEvaluator::base_value(const Compiled& c, const Graph& g) const {
  const int n = n_;
  switch (c.base) {
    case BaseStat::edges:
      return g.tie_count();
    case BaseStat::mutual: {
      int s = 0;
      for (int i = 0; i < n; ++i) s += popcount(NodeMask(g.out_mask(i) & g.in_mask(i)));
      return s / 2;
    }
    case BaseStat::ttriad: {
      int s = 0;
      if (directed_) {
        for (int i = 0; i < n; ++i) {
          const NodeMask oi = g.out_mask(i);
          for (NodeMask m = oi; m; m &= NodeMask(m - 1)) {
            s += popcount(NodeMask(oi & g.out_mask(std::countr_zero(m))));
          }
        }
      } else {
        for (int i = 0; i < n; ++i) {
          const NodeMask above_i = NodeMask(g.out_mask(i) >> (i + 1) << (i + 1));
          for (NodeMask m = above_i; m; m &= NodeMask(m - 1)) {
            const int j = std::countr_zero(m);
            s += popcount(NodeMask(above_i & g.out_mask(j) >> (j + 1) << (j + 1)));
          }
        }
      }
      return s;
    }
    case BaseStat::nodematch: {
      const auto& same = same_masks_[c.attr_slot];
      int s = 0;
      for (int i = 0; i < n; ++i) s += popcount(NodeMask(g.out_mask(i) & same[i]));
      return directed_ ? s : s / 2;
    }
    case BaseStat::nodeocov: {
      const auto& x = attr_values_[c.attr_slot];
      double s = 0;
      for (int i = 0; i < n; ++i) s += x[i] * popcount(g.out_mask(i));
      return s;
    }
    case BaseStat::nodeicov: {
      const auto& x = attr_values_[c.attr_slot];
      double s = 0;
      for (int j = 0; j < n; ++j) s += x[j] * popcount(g.in_mask(j));
      return s;
    }
    case BaseStat::fourcycle: {
      // Ordered 4-tuples: sum over i != k of paths(i->k) * paths(k->i),
      // minus the tuples where both middle nodes coincide.
      long s = 0;
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
          if (i == k) continue;
          const NodeMask ik = NodeMask(g.out_mask(i) & g.in_mask(k));
          const NodeMask ki = NodeMask(g.out_mask(k) & g.in_mask(i));
          s += long(popcount(ik)) * popcount(ki) - popcount(NodeMask(ik & ki));
        }
      }
      return static_cast<double>(s / (directed_ ? 4 : 8));
    }
  }
  return 0.0;
}

double ModelEvaluator::term_value(const Compiled& c, const Graph& g) const {
  if (c.multiplier == 0.0) return 0.0;
  // +0.0 folds negative zero so equal statistics share one bit pattern.
  return c.multiplier * apply_transform(c.transform, c.transform_arg, base_value(c, g), c.name) + 0.0;
}

void ModelEvaluator::stats(const Graph& g, std::span<double> out) const {
  for (std::size_t t = 0; t < terms_.size(); ++t) out[t] = term_value(terms_[t], g);
}

std::vector<double> ModelEvaluator::stats(const Graph& g) const {
  std::vector<double> out(terms_.size());
  stats(g, out);
  return out;
}

bool ModelEvaluator::allowed(const Graph& g) const {
  for (const auto& c : constraints_) {
    const double v = term_value(c.stat, g);
    if (c.op == ConstraintOp::at_least ? v < c.bound : v > c.bound) return false;
  }
  return true;
}

double ModelEvaluator::offset(const Graph& g) const {
  if (!allowed(g)) return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (const auto& c : offset_terms_) s += term_value(c, g);
  return s + 0.0;
}

double eval_term(const TermSpec& term, const Graph& g, const AttributeTable& attrs) {
  ModelSpec m;
  m.terms.push_back(term);
  return ModelEvaluator(m, attrs, g.n(), g.directed()).stats(g)[0];
}

std::vector<double> eval_stats(const ModelSpec& model, const Graph& g,
                               const AttributeTable& attrs) {
  return ModelEvaluator(model, attrs, g.n(), g.directed()).stats(g);
}

double eval_offset(const ModelSpec& model, const Graph& g, const AttributeTable& attrs) {
  return ModelEvaluator(model, attrs, g.n(), g.directed()).offset(g);
}

}  // namespace exergm
