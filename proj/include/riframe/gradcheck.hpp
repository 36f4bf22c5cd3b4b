#pragma once

// Central finite-difference check (one-sided next to kinks) of tape gradients with respect to every
// entry of a double-precision ParamStore.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "riframe/autodiff.hpp"

namespace riframe::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // parameter name of the worst entry
  std::size_t kinks = 0;  // entries checked one-sided because a kink was within h
};

/// err = |analytic - numeric| / max(|analytic|, |numeric|, floor).
/// `build` must construct the loss from scratch on the given tape.
/// Parameters larger than `max_entries` are checked on a random subset.
inline GradCheckResult grad_check(ParamStore<double>& store, const std::function<Var(Tape<double>&)>& build,
                                  double h = 1e-5, double floor = 1e-4, std::size_t max_entries = 64,
                                  std::uint64_t seed = 0) {
  store.zero_grad();
  {
    Tape<double> tape;
    tape.backward(build(tape));
  }
  auto eval = [&] {
    Tape<double> tape;
    return tape.scalar(build(tape));
  };
  std::mt19937_64 rng(seed);
  GradCheckResult r;
  for (auto& p : store.all()) {
    std::vector<std::size_t> idx(p.value.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (idx.size() > max_entries) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_entries);
    }
    for (std::size_t i : idx) {
      const double keep = p.value[i];
      auto at = [&](double dx) {
        p.value[i] = keep + dx;
        const double f = eval();
        p.value[i] = keep;
        return f;
      };
      const double f0 = eval(), up = at(h), down = at(-h), up2 = at(2 * h), down2 = at(-2 * h);
      double num = (up - down) / (2.0 * h);
      // A kink (max switch, relu zero) inside (-h, h) shows up as a central
      // second difference far above the one-sided ones. The kink sits on one
      // side only; the other side stays on the branch the tape took.
      const double dc = std::abs(up - 2 * f0 + down);
      const double dp = std::abs(up2 - 2 * up + f0), dm = std::abs(f0 - 2 * down + down2);
      if (dc > 10.0 * std::min(dp, dm) + 1e-12 * (1.0 + std::abs(f0))) {
        num = dp < dm ? (-3 * f0 + 4 * up - up2) / (2.0 * h) : (3 * f0 - 4 * down + down2) / (2.0 * h);
        ++r.kinks;
      }
      const double ana = p.grad[i];
      const double err = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), floor});
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = p.name;
      }
      ++r.checked;
    }
  }
  return r;
}

}  // namespace riframe::ad
