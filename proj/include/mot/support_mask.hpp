// Sparsity patterns for masked coupling manifolds, plus the total-support
// test that decides whether every allowed entry can carry positive mass.
#pragma once

#include "mot/types.hpp"

namespace mot {

// Boolean m×n pattern; true marks an entry that may hold positive mass.
// Construction rejects patterns with an empty row or column. The stronger
// structural conditions (total support, underdetermined equality system) are
// enforced where a manifold is built on top of the mask.
class SupportMask {
 public:
  explicit SupportMask(BoolArray allowed);

  static SupportMask full(Index rows, Index cols);

  Index rows() const { return allowed_.rows(); }
  Index cols() const { return allowed_.cols(); }
  bool allowed(Index i, Index j) const { return allowed_(i, j); }
  Index allowed_count() const { return count_; }
  bool is_full() const { return count_ == rows() * cols(); }
  const BoolArray& array() const { return allowed_; }

  // 1.0 on allowed entries, 0.0 elsewhere.
  Matrix indicator() const;

 private:
  BoolArray allowed_;
  Index count_ = 0;
};

struct TotalSupportReport {
  bool pass = true;
  // First allowed entry (row-major) that lies on no positive diagonal.
  Index bad_row = -1;
  Index bad_col = -1;
};

// Checks that every allowed entry lies on a positive "diagonal": a perfect
// matching of the pattern replicated to square via the standard lcm row/column
// replication. Decided exactly by a max-flow + residual-reachability argument
// when min(rows, cols) <= exact_limit; above that, a Sinkhorn probe on the 0/1
// pattern is used (non-convergence => fail, with the most suppressed entry
// reported).
TotalSupportReport total_support_check(const SupportMask& mask,
                                       Index exact_limit = 64);

}  // namespace mot
