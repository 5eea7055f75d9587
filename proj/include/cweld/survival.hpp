#ifndef CWELD_SURVIVAL_HPP_
#define CWELD_SURVIVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cweld/cascade.hpp"
#include "cweld/common.hpp"

namespace cweld {

/// Stopping-time rule constants. A node of generation g is a dyadic interval
/// at level root_level + g (N - 4); its children are the intervals at the
/// next block scale inside it at offsets 2, 7, 12, ... (four unselected boxes
/// between any two), M = floor(2^{N-4} / 5) of them.
struct TreeRuleConfig {
  int N = 9;
  double A = 8.0;                  // rule 2
  std::vector<double> A_t{1e6};    // rule 1, one per variance band; the last repeats
  double B = 32.0;                 // rules 3 and 4
  double delta = 0.1;              // rule 2 decay
  int d = 2;                       // required subtree arity
  int generations = 2;
  int root_level = -1;             // -1: max(3, N - 4)
  std::int64_t root_index = 0;
  int context_depth = -1;          // levels below a node kept in its measure; -1: N
  int rule2_max_j = -1;            // rule 2 checks j = 2..rule2_max_j; -1: context_depth / N
  double rule3_window = 16.0;      // rule 3 sums J centered within this many |I| (or |J|) of theta_I
  VarianceSchedule schedule = constant_schedule(1.0, 62);

  /// ConfigError on N < 6, non-positive constants, delta outside (0, 1),
  /// d outside [2, M], root_level < 3, a context too shallow for rules 1
  /// and 2, or levels beyond the schedule.
  void validate() const;
  int block() const { return N - 4; }
  int arity() const { return (1 << (N - 4)) / 5; }
  int resolved_root_level() const { return root_level >= 0 ? root_level : std::max(3, N - 4); }
  int resolved_context_depth() const { return context_depth >= 0 ? context_depth : N; }
  int resolved_rule2_max_j() const { return rule2_max_j >= 0 ? rule2_max_j : resolved_context_depth() / N; }
  double rule1_bound(int level) const;  // A_t of the band holding the given level
  /// Rule 3 threshold for the ancestor n levels up: B 2^{-n}.
  double rule3_bound(int n) const { return B * std::ldexp(1.0, -n); }
};

enum class FailedRule { none = 0, rule1 = 1, rule2 = 2, rule3 = 3, rule4 = 4, forced = 5 };
std::string to_string(FailedRule rule);

/// Everything the rules read about one node. Marked intervals I_k^j are the
/// even-position subintervals of j(I) = I_l u I u I_r at level(I) + N j.
struct NodeContext {
  DyadicIndex interval;
  int generation = 0;
  std::vector<std::vector<double>> marked;     // marked[j - 1][k] = nu(I_k^j), j = 1..
  std::vector<std::pair<double, double>> rule3;  // (sup, inf) for n = 1..generation
  std::pair<double, double> rule4{0.0, 0.0};     // (sup, inf)
};

/// Context of the Lebesgue measure with a zero field.
NodeContext lebesgue_context(DyadicIndex interval, int generation, const TreeRuleConfig& config);

struct RuleVerdict {
  bool survives = true;
  FailedRule failed = FailedRule::none;
};

/// Rules 1..4 in order; the first failure is reported.
RuleVerdict apply_rules(const NodeContext& context, const TreeRuleConfig& config);

struct TreeNode {
  DyadicIndex interval;
  int generation = 0;
  bool survives = false;
  FailedRule failed = FailedRule::none;
  bool d_good = false;
  std::vector<TreeNode> children;  // only on survivors below the last generation
};

struct GenerationStats {
  int nodes = 0;
  int survivors = 0;
  std::vector<int> failures;  // indexed by FailedRule
};

struct TreeResult {
  TreeNode root;
  bool d_ary = false;  // root is d-good
  std::vector<GenerationStats> generations;
  std::uint64_t seed = 0;
};

/// Test hook replacing the rules: every node passes, or fails independently
/// with probability p on the kTreeOverride stream keyed by (level, index).
struct RuleOverride {
  enum class Kind { none, force_pass, bernoulli } kind = Kind::none;
  double p_fail = 0.0;
};

/// Builds node contexts from the vaguelet field restricted to each node's
/// neighborhood J(I): the J inside I and its two neighbors on either side,
/// at levels level(I) .. level(I) + context_depth, with coefficients keyed
/// by (level, index) on the kVaguelet stream.
class TreeEngine {
 public:
  explicit TreeEngine(TreeRuleConfig config);

  const TreeRuleConfig& config() const { return config_; }
  NodeContext context(std::uint64_t seed, DyadicIndex interval, int generation) const;
  TreeResult grow(std::uint64_t seed, RuleOverride hook = {}) const;
  /// Child intervals of a node.
  std::vector<DyadicIndex> children(DyadicIndex interval) const;

 private:
  struct Impl;
  TreeRuleConfig config_;
  std::shared_ptr<const Impl> impl_;
};

/// d-good marking: a node is d-good when it survives and, below the last
/// generation, has at least d d-good children. Returns the root's flag.
bool mark_d_good(TreeNode& node, int d, int last_generation);

enum class GwMap { bound, exact };

struct GwResult {
  double q = 0;
  std::vector<double> history;  // q_0, q_1, ...
  bool converged = false;
  bool below_two_pf = false;
};

/// q_m = G_d(q_{m-1}) with
///   bound: min(1, p_f + sum_{j<d} C(M, j) s^{M-j}),
///   exact: p_f + (1 - p_f) P(Binomial(M, 1 - s) < d),
/// the probability that a node has no surviving d-ary subtree. Stops when
/// |q_m - q_{m-1}| <= tolerance or after iterations steps.
GwResult gw_survival(double q0, double p_f, int M, int d, int iterations, GwMap map = GwMap::bound,
                     double tolerance = 1e-15);

/// Nested JSON with status and failed-rule tags.
void write_tree_json(const std::filesystem::path& path, const TreeResult& tree);
/// generation, nodes, survivors, failures by rule.
void write_tree_summary_csv(const std::filesystem::path& path, const TreeResult& tree);

}  // namespace cweld

#endif  // CWELD_SURVIVAL_HPP_
