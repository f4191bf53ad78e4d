#include "polygen/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "polygen/parallel.hpp"

namespace polygen {

double DiscreteDomain::value(int j) const {
  if (j < 0 || j >= cardinality)
    throw std::out_of_range("DiscreteDomain::value: index " + std::to_string(j) + " out of range");
  return lower + (upper - lower) * static_cast<double>(j) / static_cast<double>(cardinality - 1);
}

SyntProblem SyntProblem::synt(int dim, int cardinality, double threshold, double lower, double upper) {
  if (dim < 1) throw std::invalid_argument("SyntProblem::synt: dim must be positive");
  if (cardinality < 2) throw std::invalid_argument("SyntProblem::synt: cardinality must be >= 2");
  SyntProblem p;
  p.dim = dim;
  p.domains.assign(static_cast<std::size_t>(dim), DiscreteDomain{lower, upper, cardinality});
  p.threshold = threshold;
  return p;
}

Assignment make_assignment(const SyntProblem& problem, std::vector<int> indices) {
  if (static_cast<int>(indices.size()) != problem.dim)
    throw std::invalid_argument("make_assignment: dimension mismatch");
  Assignment a;
  a.values.reserve(indices.size());
  for (int t = 0; t < problem.dim; ++t) a.values.push_back(problem.domains[t].value(indices[t]));
  a.indices = std::move(indices);
  return a;
}

double RegionSpec::size() const {
  double n = 1.0;
  for (const auto& set : allowed) n *= static_cast<double>(set.size());
  return n;
}

namespace {

inline double quartic_term(double v) { return 0.25 * v * v * v * v - 2.0 * v * v + 5.0; }

}  // namespace

double f_test(const SyntProblem& problem, const Assignment& x) {
  if (static_cast<int>(x.values.size()) != problem.dim)
    throw std::invalid_argument("f_test: dimension mismatch");
  double sum = 0.0;
  for (double v : x.values) sum += quartic_term(v);
  return sum / static_cast<double>(problem.dim);
}

double reward(const SyntProblem& problem, const Assignment& x) {
  const double f = f_test(problem, x);
  const double denom = problem.threshold + f;
  if (denom <= 0.0)
    throw std::domain_error("reward: threshold + f_test is not positive");
  return std::min((problem.threshold - f) / denom, 0.0);
}

int octant_of(const Assignment& x) {
  int label = 0;
  for (std::size_t t = 0; t < x.values.size(); ++t) {
    if (x.values[t] == 0.0) throw std::domain_error("octant_of: coordinate exactly zero, octant undefined");
    if (x.values[t] > 0.0) label |= 1 << t;
  }
  return label;
}

ConditionSet octant_regions(const SyntProblem& problem) {
  const int t_dim = problem.dim;
  std::vector<std::vector<int>> negative(t_dim), positive(t_dim);
  for (int t = 0; t < t_dim; ++t) {
    const DiscreteDomain& d = problem.domains[t];
    for (int j = 0; j < d.cardinality; ++j) {
      const double v = d.value(j);
      if (v == 0.0)
        throw std::domain_error("octant_regions: grid value exactly zero at index " + std::to_string(j));
      (v > 0.0 ? positive[t] : negative[t]).push_back(j);
    }
  }
  ConditionSet cs;
  const int n_labels = 1 << t_dim;
  cs.regions.reserve(n_labels);
  for (int label = 0; label < n_labels; ++label) {
    RegionSpec region;
    region.allowed.reserve(t_dim);
    for (int t = 0; t < t_dim; ++t)
      region.allowed.push_back((label >> t) & 1 ? positive[t] : negative[t]);
    cs.regions.push_back(std::move(region));
  }
  return cs;
}

ConditionSet unconditional_conditions(const SyntProblem& problem) {
  RegionSpec full;
  full.allowed.reserve(problem.domains.size());
  for (const DiscreteDomain& d : problem.domains) {
    std::vector<int> all(static_cast<std::size_t>(d.cardinality));
    for (int j = 0; j < d.cardinality; ++j) all[j] = j;
    full.allowed.push_back(std::move(all));
  }
  ConditionSet cs;
  cs.regions.push_back(std::move(full));
  return cs;
}

bool region_membership(const Assignment& x, const RegionSpec& region) {
  if (x.indices.size() != region.allowed.size())
    throw std::invalid_argument("region_membership: dimension mismatch");
  for (std::size_t t = 0; t < region.allowed.size(); ++t) {
    if (!std::binary_search(region.allowed[t].begin(), region.allowed[t].end(), x.indices[t]))
      return false;
  }
  return true;
}

bool regions_disjoint(const RegionSpec& a, const RegionSpec& b) {
  if (a.allowed.size() != b.allowed.size())
    throw std::invalid_argument("regions_disjoint: dimension mismatch");
  for (std::size_t t = 0; t < a.allowed.size(); ++t) {
    std::vector<int> common;
    std::set_intersection(a.allowed[t].begin(), a.allowed[t].end(), b.allowed[t].begin(),
                          b.allowed[t].end(), std::back_inserter(common));
    if (common.empty()) return true;
  }
  return false;
}

void validate_conditions(const SyntProblem& problem, const ConditionSet& conditions) {
  if (conditions.regions.empty()) throw std::invalid_argument("condition set has no regions");
  for (std::size_t i = 0; i < conditions.regions.size(); ++i) {
    const RegionSpec& r = conditions.regions[i];
    if (static_cast<int>(r.allowed.size()) != problem.dim)
      throw std::invalid_argument("region " + std::to_string(i) + ": dimension mismatch");
    for (int t = 0; t < problem.dim; ++t) {
      const auto& set = r.allowed[t];
      if (set.empty())
        throw std::invalid_argument("region " + std::to_string(i) + ": empty set for variable " + std::to_string(t));
      if (!std::is_sorted(set.begin(), set.end()))
        throw std::invalid_argument("region " + std::to_string(i) + ": unsorted set for variable " + std::to_string(t));
      if (set.front() < 0 || set.back() >= problem.domains[t].cardinality)
        throw std::invalid_argument("region " + std::to_string(i) + ": index out of range for variable " + std::to_string(t));
    }
  }
  for (std::size_t i = 0; i < conditions.regions.size(); ++i)
    for (std::size_t j = i + 1; j < conditions.regions.size(); ++j)
      if (!regions_disjoint(conditions.regions[i], conditions.regions[j]))
        throw std::invalid_argument("regions " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
}

namespace {

struct GridTables {
  int dim = 0;
  std::vector<int> cards;
  std::vector<std::vector<double>> term;  // per variable, quartic term per index
  std::vector<std::vector<double>> value;
};

GridTables build_tables(const SyntProblem& problem) {
  GridTables g;
  g.dim = problem.dim;
  g.cards.resize(problem.dim);
  g.term.resize(problem.dim);
  g.value.resize(problem.dim);
  for (int t = 0; t < problem.dim; ++t) {
    const DiscreteDomain& d = problem.domains[t];
    g.cards[t] = d.cardinality;
    g.term[t].resize(d.cardinality);
    g.value[t].resize(d.cardinality);
    for (int j = 0; j < d.cardinality; ++j) {
      g.value[t][j] = d.value(j);
      g.term[t][j] = quartic_term(g.value[t][j]);
    }
  }
  return g;
}

void check_budget(const SyntProblem& problem, double budget) {
  double points = 1.0;
  for (const DiscreteDomain& d : problem.domains) points *= static_cast<double>(d.cardinality);
  if (points > budget) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "enumeration budget exceeded (%.3g grid points > %.3g); "
                  "use sampling-based estimation instead",
                  points, budget);
    throw std::invalid_argument(msg);
  }
}

int octant_from_indices(const GridTables& g, const std::vector<int>& idx) {
  int label = 0;
  for (int t = 0; t < g.dim; ++t) {
    const double v = g.value[t][idx[t]];
    if (v == 0.0) throw std::domain_error("enumerate_solutions: grid value exactly zero, octant undefined");
    if (v > 0.0) label |= 1 << t;
  }
  return label;
}

// Enumerates the sub-grid with the first coordinate pinned, appending
// solutions in lexicographic index order.
void enumerate_slice(const SyntProblem& problem, const GridTables& g, int first_index,
                     std::vector<Assignment>& solutions, std::vector<long long>& octant_counts) {
  const int t_dim = g.dim;
  const double limit = problem.threshold * t_dim;
  std::vector<int> idx(t_dim, 0);
  idx[0] = first_index;
  std::vector<double> partial(t_dim + 1, 0.0);
  partial[1] = g.term[0][first_index];
  int t = 1;
  if (t_dim == 1) {
    if (partial[1] < limit) {
      Assignment a = make_assignment(problem, idx);
      ++octant_counts[octant_from_indices(g, idx)];
      solutions.push_back(std::move(a));
    }
    return;
  }
  while (true) {
    if (t == t_dim) {
      if (partial[t_dim] < limit) {
        Assignment a = make_assignment(problem, idx);
        ++octant_counts[octant_from_indices(g, idx)];
        solutions.push_back(std::move(a));
      }
      // step the last coordinate
      --t;
      ++idx[t];
    } else if (idx[t] >= g.cards[t]) {
      idx[t] = 0;
      --t;
      if (t == 0) break;  // first coordinate is pinned
      ++idx[t];
    } else {
      partial[t + 1] = partial[t] + g.term[t][idx[t]];
      ++t;
    }
  }
}

}  // namespace

OracleResult enumerate_solutions(const SyntProblem& problem, const OracleOptions& options) {
  check_budget(problem, options.budget);
  const GridTables g = build_tables(problem);
  const int n_slices = g.cards[0];
  const int n_octants = 1 << problem.dim;

  std::vector<std::vector<Assignment>> slice_solutions(n_slices);
  std::vector<std::vector<long long>> slice_octants(n_slices,
                                                    std::vector<long long>(n_octants, 0));
  parallel_for(n_slices, options.threads, [&](std::int64_t j0, int) {
    enumerate_slice(problem, g, static_cast<int>(j0), slice_solutions[j0], slice_octants[j0]);
  });

  OracleResult result;
  result.per_octant_counts.assign(n_octants, 0);
  for (int j0 = 0; j0 < n_slices; ++j0) {
    for (auto& a : slice_solutions[j0]) result.solutions.push_back(std::move(a));
    for (int o = 0; o < n_octants; ++o) result.per_octant_counts[o] += slice_octants[j0][o];
  }
  result.total_count = static_cast<long long>(result.solutions.size());
  return result;
}

OracleResult enumerate_solutions_serial(const SyntProblem& problem, double budget) {
  check_budget(problem, budget);
  const GridTables g = build_tables(problem);
  const int t_dim = problem.dim;
  const int n_octants = 1 << t_dim;
  const double limit = problem.threshold * t_dim;

  OracleResult result;
  result.per_octant_counts.assign(n_octants, 0);
  std::vector<int> idx(t_dim, 0);
  while (true) {
    double sum = 0.0;
    for (int t = 0; t < t_dim; ++t) sum += g.term[t][idx[t]];
    if (sum < limit) {
      Assignment a = make_assignment(problem, idx);
      ++result.per_octant_counts[octant_from_indices(g, idx)];
      result.solutions.push_back(std::move(a));
    }
    int t = t_dim - 1;
    while (t >= 0 && ++idx[t] >= g.cards[t]) {
      idx[t] = 0;
      --t;
    }
    if (t < 0) break;
  }
  result.total_count = static_cast<long long>(result.solutions.size());
  return result;
}

}  // namespace polygen
