// SPDX-License-Identifier: Apache-2.0

#include "mivc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace mivc {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double pooled_loss(const PoolingParams& params, const Bag& bag, const Vector& upstream) {
  return dot(upstream, pool(params, bag).E);
}

// Central difference of `loss` with respect to *slot.
double central_difference(double& slot, double step, const std::function<double()>& loss) {
  const double saved = slot;
  slot = saved + step;
  const double plus = loss();
  slot = saved - step;
  const double minus = loss();
  slot = saved;
  return (plus - minus) / (2.0 * step);
}

}  // namespace

GradCheckReport check_pool_gradients(PoolingKind kind, const GradCheckOptions& options) {
  if (!is_attention(kind)) throw UsageError("gradient check covers attn and gated pooling");
  if (options.trials == 0) throw UsageError("gradient check needs at least one trial");

  Rng rng(options.seed);
  GradCheckReport report;
  report.kind = kind;
  report.trials = options.trials;
  GradGroupResult gw{"w"}, gz{"Z"}, gg{"G"}, ge{"e"};

  auto track = [&](GradGroupResult& group, double analytic, double numeric) {
    group.max_rel_error = std::max(group.max_rel_error, relative_error(analytic, numeric));
    ++group.entries;
  };

  for (std::size_t trial = 0; trial < options.trials; ++trial) {
    const auto K = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(options.max_hidden)));
    const auto M = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(options.max_dim)));
    const auto N = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(options.max_instances)));

    PoolingParams params = PoolingParams::zeros(kind, K, M);
    for (double& x : params.w) x = rng.uniform(-1.0, 1.0);
    for (double& x : params.Z.span()) x = rng.uniform(-1.0, 1.0);
    for (double& x : params.G.span()) x = rng.uniform(-1.0, 1.0);
    Bag bag;
    for (std::size_t n = 0; n < N; ++n) {
      Vector e(M);
      for (double& x : e) x = rng.normal();
      bag.instances.push_back({std::move(e), std::nullopt});
    }
    Vector upstream(M);
    for (double& x : upstream) x = rng.normal();

    PoolGradients grads = pool_backward(params, bag, upstream);
    if (options.inject_fault) (*grads.d_w)[0] += 1e-3 * (1.0 + std::abs((*grads.d_w)[0]));

    const auto loss = [&] { return pooled_loss(params, bag, upstream); };
    for (std::size_t k = 0; k < K; ++k) {
      track(gw, (*grads.d_w)[k], central_difference(params.w[k], options.step, loss));
    }
    for (std::size_t i = 0; i < params.Z.size(); ++i) {
      track(gz, grads.d_Z->span()[i], central_difference(params.Z.span()[i], options.step, loss));
    }
    if (kind == PoolingKind::kGated) {
      for (std::size_t i = 0; i < params.G.size(); ++i) {
        track(gg, grads.d_G->span()[i],
              central_difference(params.G.span()[i], options.step, loss));
      }
    }
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t m = 0; m < M; ++m) {
        track(ge, grads.d_instances[n][m],
              central_difference(bag.instances[n].values[m], options.step, loss));
      }
    }
  }

  report.groups = {gw, gz};
  if (kind == PoolingKind::kGated) report.groups.push_back(gg);
  report.groups.push_back(ge);
  report.passed = std::all_of(report.groups.begin(), report.groups.end(), [&](const auto& g) {
    return g.max_rel_error < options.tolerance;
  });
  return report;
}

}  // namespace mivc
