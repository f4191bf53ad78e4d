#pragma once

#include <cstdint>
#include <vector>

namespace polygen {

// Evenly spaced inclusive-endpoint grid: value(j) = lower + (upper-lower)*j/(cardinality-1).
struct DiscreteDomain {
  double lower = -5.0;
  double upper = 5.0;
  int cardinality = 100;

  double value(int j) const;
};

// Synt-ND instance: T variables over identical grids and the static
// constraint f_test(x) < threshold.
struct SyntProblem {
  int dim = 3;
  std::vector<DiscreteDomain> domains;
  double threshold = 1.2;

  static SyntProblem synt(int dim, int cardinality = 100, double threshold = 1.2,
                          double lower = -5.0, double upper = 5.0);
};

struct Assignment {
  std::vector<int> indices;
  std::vector<double> values;
};

Assignment make_assignment(const SyntProblem& problem, std::vector<int> indices);

// Factorized subregion: the Cartesian product of one sorted index set per
// variable.
struct RegionSpec {
  std::vector<std::vector<int>> allowed;

  double size() const;  // |Omega| = product of per-variable set sizes
};

// Class labels 0..L-1 paired with pairwise-disjoint regions.
struct ConditionSet {
  std::vector<RegionSpec> regions;

  int num_classes() const { return static_cast<int>(regions.size()); }
};

double f_test(const SyntProblem& problem, const Assignment& x);
double reward(const SyntProblem& problem, const Assignment& x);

// Sign-pattern label: bit t set iff values[t] > 0. Throws on an exact zero
// coordinate (undefined octant).
int octant_of(const Assignment& x);

// The 2^T octant regions keyed by the octant_of encoding; pairwise disjoint,
// jointly exhaustive.
ConditionSet octant_regions(const SyntProblem& problem);

// Single full-domain region; the degenerate condition set of unconditional runs.
ConditionSet unconditional_conditions(const SyntProblem& problem);

bool region_membership(const Assignment& x, const RegionSpec& region);
bool regions_disjoint(const RegionSpec& a, const RegionSpec& b);

// Throws unless every region is non-empty, in-range, matches the problem
// dimension, and all regions are pairwise disjoint.
void validate_conditions(const SyntProblem& problem, const ConditionSet& conditions);

struct OracleResult {
  std::vector<Assignment> solutions;  // sorted by index tuple
  std::vector<long long> per_octant_counts;
  long long total_count = 0;
};

struct OracleOptions {
  double budget = 1e8;  // refuse grids larger than this many points
  int threads = 0;      // 0 = all available
};

// Exact brute-force enumeration of grid assignments with f_test < threshold,
// partitioned across workers by the first coordinate and merged in index
// order (deterministic regardless of thread count).
OracleResult enumerate_solutions(const SyntProblem& problem, const OracleOptions& options = {});

// Plain odometer-loop reference; kept for testing the parallel kernel.
OracleResult enumerate_solutions_serial(const SyntProblem& problem, double budget = 1e8);

}  // namespace polygen
