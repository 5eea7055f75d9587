#include "cweld/survival.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "cweld/fft.hpp"
#include "cweld/rng.hpp"
#include "cweld/vaguelet.hpp"

namespace cweld {

namespace {

constexpr int kLocalOffset = 4;   // a node is the level-4 interval 8 of its 16-unit local circle
constexpr int kLocalCenter = 8;
constexpr int kOversample = 4;    // local grid 2^{level + 4} resolves the finest local vaguelet
constexpr int kProfileLevel = 10;
constexpr int kProfileOversample = 6;
constexpr int kMaxContextDepth = 18;
constexpr double kReach = 32.0;  // vaguelet tail beyond 32 widths is below 1e-6 of its peak

std::int64_t wrap(std::int64_t i, std::int64_t count) { return ((i % count) + count) % count; }

// Circular |a - b| on Z / count.
std::int64_t circular_gap(std::int64_t a, std::int64_t b, std::int64_t count) {
  const std::int64_t g = wrap(a - b, count);
  return std::min(g, count - g);
}

}  // namespace

void TreeRuleConfig::validate() const {
  if (N < 6) throw ConfigError("tree block depth N must be >= 6");
  if (!(A > 0.0) || !(B > 0.0)) throw ConfigError("rule constants A and B must be positive");
  if (A_t.empty()) throw ConfigError("rule 1 needs at least one A_t");
  for (double a : A_t)
    if (!(a > 0.0)) throw ConfigError("rule constants A_t must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("rule 2 exponent delta must lie in (0, 1)");
  if (N > 24) throw ConfigError("tree block depth N must be <= 24");
  const int M = arity();
  if (d < 2 || d > M)
    throw ConfigError("subtree arity d must satisfy 2 <= d <= M = floor(2^(N-4)/5) = " + std::to_string(M));
  if (generations < 0) throw ConfigError("generations must be nonnegative");
  const int root = resolved_root_level();
  if (root < 3) throw ConfigError("root level must be >= 3 so a node's five-interval neighborhood is distinct");
  if (root_index < 0 || root_index >= (std::int64_t{1} << std::min(root, 62)))
    throw ConfigError("root index outside its level");
  const int cd = resolved_context_depth();
  if (cd < N) throw ConfigError("context depth must be >= N to resolve the rule-1 intervals");
  if (cd > kMaxContextDepth) throw ConfigError("context depth must be <= " + std::to_string(kMaxContextDepth));
  const int r2 = resolved_rule2_max_j();
  if (r2 * N > cd)
    throw ConfigError("context depth " + std::to_string(cd) + " cannot resolve rule 2 at j = " + std::to_string(r2) +
                      " (needs " + std::to_string(r2 * N) + ")");
  if (!(rule3_window > 0.0)) throw ConfigError("rule 3 window must be positive");
  const int deepest = root + generations * block() + cd;
  if (deepest > 62 || deepest > schedule.depth())
    throw ConfigError("tree reaches level " + std::to_string(deepest) + " beyond the schedule depth " +
                      std::to_string(schedule.depth()));
}

double TreeRuleConfig::rule1_bound(int level) const {
  const int band = level >= 1 && level <= schedule.depth() ? schedule.band_of_level(level) : schedule.bands();
  return A_t[std::min<std::size_t>(static_cast<std::size_t>(band - 1), A_t.size() - 1)];
}

std::string to_string(FailedRule rule) {
  switch (rule) {
    case FailedRule::none: return "none";
    case FailedRule::rule1: return "rule1";
    case FailedRule::rule2: return "rule2";
    case FailedRule::rule3: return "rule3";
    case FailedRule::rule4: return "rule4";
    case FailedRule::forced: return "forced";
  }
  return "none";
}

namespace {

int marked_levels(const TreeRuleConfig& config) { return std::max(1, config.resolved_rule2_max_j()); }

}  // namespace

NodeContext lebesgue_context(DyadicIndex interval, int generation, const TreeRuleConfig& config) {
  NodeContext c;
  c.interval = interval;
  c.generation = generation;
  for (int j = 1; j <= marked_levels(config); ++j) {
    const std::size_t count = std::size_t{3} << (config.N * j - 1);
    c.marked.emplace_back(count, std::ldexp(interval.length(), -config.N * j));
  }
  c.rule3.assign(static_cast<std::size_t>(generation), {0.0, 0.0});
  return c;
}

RuleVerdict apply_rules(const NodeContext& c, const TreeRuleConfig& config) {
  const int jmax = config.resolved_rule2_max_j();
  if (c.marked.empty() || static_cast<int>(c.marked.size()) < jmax)
    throw ConfigError("node context lacks the marked levels the rules need");
  const double len = c.interval.length();

  const double At = config.rule1_bound(c.interval.j + config.N);
  const double len1 = std::ldexp(len, -config.N);
  for (double m : c.marked[0])
    if (!(m >= len1 / At && m <= At * len1)) return {false, FailedRule::rule1};

  for (int j = 2; j <= jmax; ++j) {
    const auto& marks = c.marked[static_cast<std::size_t>(j - 1)];
    const std::size_t third = marks.size() / 3;
    const double bound = config.A * len * std::exp2(-j * config.delta);
    for (std::size_t part = 0; part < 3; ++part) {
      double sum = 0.0;
      for (std::size_t k = part * third; k < (part + 1) * third; ++k) sum += marks[k];
      if (!(sum <= bound)) return {false, FailedRule::rule2};
    }
  }

  for (std::size_t n = 1; n <= c.rule3.size(); ++n) {
    const double bound = config.rule3_bound(static_cast<int>(n));
    const auto [hi, lo] = c.rule3[n - 1];
    if (!(hi <= bound && lo >= -bound)) return {false, FailedRule::rule3};
  }

  if (!(c.rule4.first <= config.B && c.rule4.second >= -config.B)) return {false, FailedRule::rule4};
  return {};
}

struct TreeEngine::Impl {
  VagueletTable table;
  int context_depth = 0;
  int grid = 0;                           // local circle samples
  std::vector<std::vector<double>> block_squares;  // per local level k + 4: sum of psi^2 over the 5-block
  std::vector<double> profile;            // psi_{10,0} samples, spacing 2^{-6} in units of |J|
  int profile_level = 0;

  Impl(const TreeRuleConfig& config)
      : table(build_meyer_filter(), kLocalOffset + config.resolved_context_depth(), 3, VagueletScaling::kRaw) {
    context_depth = config.resolved_context_depth();
    grid = 1 << (kLocalOffset + context_depth + kOversample);
    for (int k = 0; k <= context_depth; ++k) {
      const int lv = kLocalOffset + k;
      // psi^2 circularly convolved with the comb of 5-block translates
      const auto base = evaluate_vaguelet_grid(table, DyadicIndex(lv, 0), grid);
      const std::int64_t step = grid >> lv;
      std::vector<double> sq(base.size()), comb(base.size(), 0.0), q(base.size());
      for (std::size_t i = 0; i < base.size(); ++i) sq[i] = base[i] * base[i];
      for (std::int64_t p = std::int64_t{6} << k; p < (std::int64_t{11} << k); ++p)
        comb[static_cast<std::size_t>(p * step)] = 1.0;
      std::vector<Complex> a(base.size() / 2 + 1), b(a.size());
      fft::forward_real(sq, a);
      fft::forward_real(comb, b);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i] / double(grid);
      fft::backward_real(a, q);
      block_squares.push_back(std::move(q));
    }
    profile_level = std::min(kProfileLevel, table.max_level());
    profile = evaluate_vaguelet_grid(table, DyadicIndex(profile_level, 0), 1 << (profile_level + kProfileOversample));
  }

  // psi_{j,l}(theta) through the level-independent profile g(2^j theta - l).
  double vaguelet(int j, std::int64_t l, double theta) const {
    const double span = std::ldexp(1.0, j);
    double x = std::fmod(span * theta - double(l), span);
    if (x < -0.5 * span) x += span;
    if (x >= 0.5 * span) x -= span;
    const double half = std::ldexp(1.0, profile_level - 1);
    if (std::abs(x) >= half) return 0.0;
    const double P = double(profile.size());
    double u = x * std::ldexp(1.0, kProfileOversample);
    if (u < 0) u += P;
    const auto i0 = static_cast<std::size_t>(u);
    const double t = u - double(i0);
    return (1 - t) * profile[i0 % profile.size()] + t * profile[(i0 + 1) % profile.size()];
  }
};

TreeEngine::TreeEngine(TreeRuleConfig config) : config_(std::move(config)) {
  config_.validate();
  impl_ = std::make_shared<const Impl>(config_);
}

std::vector<DyadicIndex> TreeEngine::children(DyadicIndex I) const {
  const int lv = I.j + config_.block();
  std::vector<DyadicIndex> out;
  for (int i = 0; i < config_.arity(); ++i)
    out.emplace_back(lv, (I.l << config_.block()) + 2 + 5 * i);
  return out;
}

NodeContext TreeEngine::context(std::uint64_t seed, DyadicIndex I, int generation) const {
  const Impl& im = *impl_;
  const TreeRuleConfig& cf = config_;
  const CounterRng rng(seed, Stream::kVaguelet);
  const int L = I.j;
  const double len = I.length();
  const auto t_at = [&](int level) { return cf.schedule.variance_at_level(level); };

  NodeContext c;
  c.interval = I;
  c.generation = generation;

  // Measure of the 5-block neighborhood on the local circle [(l-8)|I|, (l+8)|I|).
  std::vector<Complex> half(static_cast<std::size_t>(im.grid / 2 + 1), Complex{});
  std::vector<double> comp(static_cast<std::size_t>(im.grid), 0.0);
  for (int k = 0; k <= im.context_depth; ++k) {
    const int real = L + k, local = kLocalOffset + k;
    const double t = t_at(real);
    const std::int64_t count = std::int64_t{1} << real;
    std::vector<double> coeffs(std::size_t{1} << local, 0.0);
    const double w = std::sqrt(t * kPi);
    for (std::int64_t p = std::int64_t{6} << k; p < (std::int64_t{11} << k); ++p) {
      const std::int64_t r = wrap(((I.l - kLocalCenter) << k) + p, count);
      coeffs[static_cast<std::size_t>(p)] = w * rng.normal(static_cast<std::uint64_t>(real), static_cast<std::uint64_t>(r));
    }
    add_level_spectrum(im.table, local, coeffs, half);
    const auto& q = im.block_squares[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < comp.size(); ++i) comp[i] += 0.5 * t * kPi * q[i];
  }
  std::vector<double> field(static_cast<std::size_t>(im.grid));
  fft::backward_real(half, field);
  const double cell = 16.0 * len / im.grid;
  std::vector<double> density(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) density[i] = std::exp(field[i] - comp[i]) * cell;

  for (int j = 1; j <= marked_levels(cf); ++j) {
    const int local = kLocalOffset + cf.N * j;
    const std::int64_t cells = im.grid >> local;
    const std::int64_t first = std::int64_t{7} << (cf.N * j);
    const std::int64_t total = std::int64_t{3} << (cf.N * j);
    std::vector<double> marks;
    marks.reserve(static_cast<std::size_t>(total / 2));
    for (std::int64_t s = 0; s < total; s += 2) {
      double m = 0.0;
      const std::int64_t begin = (first + s) * cells;
      for (std::int64_t i = begin; i < begin + cells; ++i) m += density[static_cast<std::size_t>(i)];
      marks.push_back(m);
    }
    c.marked.push_back(std::move(marks));
  }

  // Lattice over the 5-block; j(I) is its middle three fifths.
  const int per = 1 << (cf.N - 2);
  const int points = 5 * per;
  const double h = len / per;
  const double start = (double(I.l) - 2.0) * len;
  const double center = (double(I.l) + 0.5) * len;
  auto add_term = [&](std::vector<double>& acc, int j, std::int64_t l, int from, int to) {
    const double a = std::sqrt(t_at(j) * kPi) * rng.normal(static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(l));
    const double ref = im.vaguelet(j, l, center);
    const double span = std::ldexp(1.0, j);
    if (span > 4.0 * kReach) {
      // lattice points beyond kReach widths of J see a negligible tail
      double x0 = std::fmod(span * start - double(l), span);
      if (x0 < -0.5 * span) x0 += span;
      if (x0 >= 0.5 * span) x0 -= span;
      const double dx = span * h;
      from = std::max(from, static_cast<int>(std::floor((-kReach - x0) / dx - 0.5)));
      to = std::min(to, static_cast<int>(std::ceil((kReach - x0) / dx - 0.5)) + 1);
    }
    for (int p = from; p < to; ++p) acc[static_cast<std::size_t>(p)] += a * (im.vaguelet(j, l, start + (p + 0.5) * h) - ref);
  };
  auto sup_inf = [](const std::vector<double>& v, int from, int to) {
    const auto [lo, hi] = std::minmax_element(v.begin() + from, v.begin() + to);
    return std::pair<double, double>{*hi, *lo};
  };

  // Rule 4: J inside j(I) with |J| >= |I_k^1| 2^5.
  {
    std::vector<double> acc(static_cast<std::size_t>(points), 0.0);
    for (int k = 0; k <= cf.N - 5; ++k) {
      const int j = L + k;
      const std::int64_t count = std::int64_t{1} << j;
      for (std::int64_t p = (I.l - 1) << k; p < (I.l + 2) << k; ++p) add_term(acc, j, wrap(p, count), per, 4 * per);
    }
    c.rule4 = sup_inf(acc, per, 4 * per);
  }

  // Rule 3: J in J(Ans_n(I)) \ J(I), bucketed by the first n whose
  // neighborhood holds them, then accumulated over n.
  if (generation > 0) {
    std::vector<std::vector<double>> bucket(static_cast<std::size_t>(generation),
                                            std::vector<double>(static_cast<std::size_t>(points), 0.0));
    auto first_ancestor = [&](int j, std::int64_t l) {
      for (int n = 1; n <= generation; ++n) {
        const int an = L - n * cf.block();
        if (j < an) continue;
        const std::int64_t anc = l >> (j - an);
        if (circular_gap(anc, I.l >> (L - an), std::int64_t{1} << an) <= 2) return n;
      }
      return 0;
    };
    const int coarsest = std::max(1, L - generation * cf.block());
    for (int j = coarsest; j <= L + cf.N - 5; ++j) {
      const std::int64_t count = std::int64_t{1} << j;
      const double width = std::ldexp(1.0, -j);
      const double reach = cf.rule3_window * std::max(width, len);
      const auto lo = static_cast<std::int64_t>(std::floor((center - reach) / width));
      const auto hi = static_cast<std::int64_t>(std::ceil((center + reach) / width));
      for (std::int64_t p = lo; p <= hi && p - lo < count; ++p) {
        const std::int64_t l = wrap(p, count);
        if (j >= L && circular_gap(l >> (j - L), I.l, std::int64_t{1} << L) <= 2) continue;  // inside J(I)
        const int n = first_ancestor(j, l);
        if (n == 0) continue;
        add_term(bucket[static_cast<std::size_t>(n - 1)], j, l, 0, points);
      }
    }
    std::vector<double> acc(static_cast<std::size_t>(points), 0.0);
    for (int n = 1; n <= generation; ++n) {
      const auto& b = bucket[static_cast<std::size_t>(n - 1)];
      for (int p = 0; p < points; ++p) acc[static_cast<std::size_t>(p)] += b[static_cast<std::size_t>(p)];
      c.rule3.push_back(sup_inf(acc, 0, points));
    }
  }
  return c;
}

bool mark_d_good(TreeNode& node, int d, int last_generation) {
  int good = 0;
  for (auto& child : node.children)
    if (mark_d_good(child, d, last_generation)) ++good;
  node.d_good = node.survives && (node.generation >= last_generation || good >= d);
  return node.d_good;
}

TreeResult TreeEngine::grow(std::uint64_t seed, RuleOverride hook) const {
  TreeResult out;
  out.seed = seed;
  out.generations.assign(static_cast<std::size_t>(config_.generations + 1), GenerationStats{});
  for (auto& g : out.generations) g.failures.assign(6, 0);
  const CounterRng forced(seed, Stream::kTreeOverride);

  auto visit = [&](auto&& self, TreeNode& node) -> void {
    RuleVerdict v;
    switch (hook.kind) {
      case RuleOverride::Kind::force_pass: break;
      case RuleOverride::Kind::bernoulli:
        if (forced.uniform(static_cast<std::uint64_t>(node.interval.j), static_cast<std::uint64_t>(node.interval.l)) <
            hook.p_fail)
          v = {false, FailedRule::forced};
        break;
      case RuleOverride::Kind::none:
        v = apply_rules(context(seed, node.interval, node.generation), config_);
        break;
    }
    node.survives = v.survives;
    node.failed = v.failed;
    auto& stats = out.generations[static_cast<std::size_t>(node.generation)];
    ++stats.nodes;
    if (v.survives) ++stats.survivors;
    else ++stats.failures[static_cast<std::size_t>(v.failed)];
    if (!v.survives || node.generation >= config_.generations) return;
    for (const DyadicIndex c : children(node.interval)) {
      TreeNode child;
      child.interval = c;
      child.generation = node.generation + 1;
      node.children.push_back(std::move(child));
    }
    for (auto& child : node.children) self(self, child);
  };

  out.root.interval = DyadicIndex(config_.resolved_root_level(), config_.root_index);
  visit(visit, out.root);
  out.d_ary = mark_d_good(out.root, config_.d, config_.generations);
  return out;
}

GwResult gw_survival(double q0, double p_f, int M, int d, int iterations, GwMap map, double tolerance) {
  if (!(q0 >= 0.0 && q0 <= 1.0)) throw ConfigError("q0 must lie in [0, 1]");
  if (!(p_f >= 0.0 && p_f < 1.0)) throw ConfigError("p_f must lie in [0, 1)");
  if (d < 1 || d > M) throw ConfigError("need 1 <= d <= M");
  if (iterations < 0) throw ConfigError("iterations must be nonnegative");
  std::vector<double> binom(static_cast<std::size_t>(d), 1.0);
  for (int j = 1; j < d; ++j) binom[static_cast<std::size_t>(j)] = binom[static_cast<std::size_t>(j - 1)] * (M - j + 1) / j;
  auto G = [&](double s) {
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      const double term = binom[static_cast<std::size_t>(j)] * std::pow(s, M - j);
      sum += map == GwMap::bound ? term : term * std::pow(1.0 - s, j);
    }
    return map == GwMap::bound ? std::min(1.0, p_f + sum) : p_f + (1.0 - p_f) * sum;
  };
  GwResult r;
  r.history.push_back(q0);
  double q = q0;
  for (int m = 0; m < iterations; ++m) {
    const double next = G(q);
    r.history.push_back(next);
    const bool done = std::abs(next - q) <= tolerance;
    q = next;
    if (done) {
      r.converged = true;
      break;
    }
  }
  r.q = q;
  r.below_two_pf = q <= 2.0 * p_f;
  return r;
}

namespace {

nlohmann::json node_json(const TreeNode& n) {
  nlohmann::json j{{"level", n.interval.j},
                   {"index", n.interval.l},
                   {"generation", n.generation},
                   {"survives", n.survives},
                   {"failed_rule", to_string(n.failed)},
                   {"d_good", n.d_good}};
  j["children"] = nlohmann::json::array();
  for (const auto& c : n.children) j["children"].push_back(node_json(c));
  return j;
}

}  // namespace

void write_tree_json(const std::filesystem::path& path, const TreeResult& tree) {
  nlohmann::json j{{"seed", tree.seed}, {"d_ary", tree.d_ary}, {"root", node_json(tree.root)}};
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path.string());
  os << j.dump(1) << '\n';
}

void write_tree_summary_csv(const std::filesystem::path& path, const TreeResult& tree) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path.string());
  os << "generation,nodes,survivors,rule1,rule2,rule3,rule4,forced\n";
  for (std::size_t g = 0; g < tree.generations.size(); ++g) {
    const auto& s = tree.generations[g];
    os << g << ',' << s.nodes << ',' << s.survivors;
    for (int r = 1; r <= 5; ++r) os << ',' << s.failures[static_cast<std::size_t>(r)];
    os << '\n';
  }
}

}  // namespace cweld
