#pragma once

// Column statistics, center/scale and principal component analysis on
// distributed data matrices (observations in rows, variables in columns).

#include "distla/dist_matrix.hpp"

#include <optional>
#include <vector>

namespace distla {

struct ColumnMoments {
  std::vector<double> means;
  std::vector<double> std_devs;  // sample, divisor h - 1
};

/// Collective.  Column means over all ranks, replicated.  Throws
/// UsageError for h == 0.
std::vector<double> column_means(const DistMatrix<double>& a);

/// Collective; two passes (means, then centered squares).  Needs h >= 2.
ColumnMoments column_moments(const DistMatrix<double>& a);

struct ScaledMatrix {
  DistMatrix<double> matrix;
  std::vector<double> center;  // empty when not centering
  std::vector<double> scale;   // empty when not scaling
};

/// Collective.  X~ = (X - 1 center^T) ./ scale^T.  Scale factors are
/// sqrt(sum((x - c)^2) / (h - 1)) with c the column mean, or 0 when not
/// centering (the root-mean-square rule R's scale() uses).  A zero scale
/// factor is an error.
ScaledMatrix center_scale(const DistMatrix<double>& a, bool center, bool scale);

struct PcaOptions {
  bool retx = true;  // accepted, ignored: the result never carries scores
  bool center = true;
  bool scale = false;
  std::optional<double> tol;  // accepted, ignored
};

struct PcaResult {
  std::vector<double> sdev;  // descending
  Matrix rotation;           // w x w, replicated
  std::vector<double> center;
};

/// Collective.  center_scale, then singular values and right vectors of
/// the result; sdev = (1 / sqrt(h - 1)) * sigma.  Needs h >= 2, h >= w.
PcaResult prcomp(const DistMatrix<double>& a, const PcaOptions& options = {});

} // namespace distla
