#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "exergm/graph.hpp"

namespace exergm {

enum class BaseStat { edges, mutual, ttriad, nodematch, nodeicov, nodeocov, fourcycle };
enum class Transform { identity, sqrt, log, power, scale };
enum class Interaction { none, size_indicator, log_inverse_size };

const char* base_name(BaseStat base);
bool base_needs_attribute(BaseStat base);

/// One sufficient statistic: interaction(n) * transform(base(g)).
struct TermSpec {
  BaseStat base = BaseStat::edges;
  std::string attribute;  // nodematch / nodeicov / nodeocov only
  Transform transform = Transform::identity;
  double transform_arg = 0.0;  // exponent for power, factor for scale
  Interaction interaction = Interaction::none;
  int size_k = 0;  // I(n == size_k)

  std::string display_name() const;
  bool operator==(const TermSpec&) const = default;
};

enum class ConstraintOp { at_least, at_most };

/// Fixed-coefficient model component. A `term` offset adds its value to the
/// log-probability; a `constraint` offset is 0 when the predicate holds and
/// -inf otherwise, removing the graph from the support.
struct OffsetSpec {
  enum class Kind { term, constraint };
  Kind kind = Kind::term;
  TermSpec term;
  ConstraintOp op = ConstraintOp::at_least;
  double bound = 0.0;

  std::string display_name() const;
  bool operator==(const OffsetSpec&) const = default;
};

/// Ordered terms (theta index = position) plus offsets. Directedness is a
/// property of the networks, not of the model.
struct ModelSpec {
  std::vector<TermSpec> terms;
  std::vector<OffsetSpec> offsets;

  std::size_t size() const { return terms.size(); }
  std::vector<std::string> term_names() const;
  /// Throws std::invalid_argument on an empty term list or duplicate names.
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

/// Documented counting conventions, exported in result metadata.
inline constexpr const char* kCountingConventions =
    "edges: sum over i!=j of y_ij; mutual: unordered dyads with both ties; "
    "ttriad: ordered distinct triples (i,j,k) with y_ij=y_jk=y_ik=1 "
    "(undirected: triangles); fourcycle: distinct 4-cycles (ordered-tuple sum "
    "divided by 4 directed, 8 undirected)";

double eval_term(const TermSpec& term, const Graph& g, const AttributeTable& attrs);
std::vector<double> eval_stats(const ModelSpec& model, const Graph& g,
                               const AttributeTable& attrs);
/// Sum of offsets; -inf exactly when a constraint fires.
double eval_offset(const ModelSpec& model, const Graph& g, const AttributeTable& attrs);

/// Model bound to one (n, directed, attributes) configuration. Resolves
/// attributes and size interactions once so per-graph evaluation is cheap;
/// used by table construction and the sampler.
class ModelEvaluator {
 public:
  ModelEvaluator(const ModelSpec& model, const AttributeTable& attrs, int n,
                 bool directed);

  std::size_t size() const { return terms_.size(); }
  int n() const { return n_; }
  bool directed() const { return directed_; }

  void stats(const Graph& g, std::span<double> out) const;
  std::vector<double> stats(const Graph& g) const;
  double offset(const Graph& g) const;
  bool allowed(const Graph& g) const;

 private:
  struct Compiled {
    BaseStat base;
    int attr_slot;  // index into attr_values_ / same_masks_, -1 if none
    Transform transform;
    double transform_arg;
    double multiplier;  // resolved interaction
    std::string name;
  };

  double base_value(const Compiled& c, const Graph& g) const;
  double term_value(const Compiled& c, const Graph& g) const;

  int n_;
  bool directed_;
  std::vector<Compiled> terms_;
  std::vector<Compiled> offset_terms_;
  struct Constraint {
    Compiled stat;
    ConstraintOp op;
    double bound;
  };
  std::vector<Constraint> constraints_;
  std::vector<std::vector<double>> attr_values_;
  std::vector<std::array<NodeMask, kMaxUndirectedNodes>> same_masks_;
};

}  // namespace exergm
