#pragma once

#include "bqr/blocks.hpp"

namespace bqr {

// A point (u, s) paired with the second-order cone ||u||_2 <= s.
struct ConePoint {
  Vector u;
  double s = 0.0;
};

// Proximal map of lambda * ||.||_{2,1}: each block shrinks by
// max(0, 1 - lambda / ||v[j]||_2). Zero blocks stay zero.
Vector block_soft_threshold(const BlockPartition& p, const ConstVectorRef& v, double lambda);

// Per-block thresholds lambda_j (weighted group shrinkage); result written to out.
void block_soft_threshold_weighted(const BlockPartition& p, const ConstVectorRef& v,
                                   const ConstVectorRef& lambdas, Eigen::Ref<Vector> out);

// Euclidean projection onto {w : ||w||_{2,1} <= radius}.
Vector project_l21_ball(const BlockPartition& p, const ConstVectorRef& v, double radius);

// Multiplier lambda* >= 0 such that the projection equals block_soft_threshold(v, lambda*).
double l21_ball_multiplier(const BlockPartition& p, const ConstVectorRef& v, double radius);

ConePoint project_soc(const ConePoint& point);

// In-place projection of (u, s) onto the second-order cone.
void project_soc_inplace(Eigen::Ref<Vector> u, double& s);

}  // namespace bqr
