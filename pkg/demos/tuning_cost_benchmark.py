"""Cost of hyperparameter tuning: online updates vs periodic re-search.

Four simulated weeks of 15-minute observations (2688 steps), refitting daily
(96 steps) and re-tuning weekly (672 steps) for the rolling baselines. Model
fits are the hardware-independent cost unit: every strategy pays one fit per
refit window, and the baselines pay extra fits for every backtest trial or
gradient iteration inside each weekly tuning phase. The online learner pays
nothing there - its hyper-gradients are byproducts of prediction.

Also prints the local-regret rate R_T/T (cumulative squared projected
gradients) of the online run and the within-window gradient-variation
diagnostic that justifies applying one averaged update per window.

Run:  python3 demos/tuning_cost_benchmark.py
"""

import numpy as np

from mkridge import (
    ArdKernel,
    CompositeKernel,
    FeasibleSet,
    HyperParams,
    PeriodicKernel,
    RegretTrace,
    Schedule,
    Strategy,
    SyntheticConfig,
    TunerConfig,
    build_features,
    fit_count_report,
    generate_synthetic,
    regret_update,
    run,
    variation_m,
)
from mkridge.data import BURN_IN
from mkridge.model import fit, loss_hyper_gradient, theta_jacobian

LAGS = 20
STEPS = 2688  # four weeks of 96 observations/day
TRAIN_WINDOW, VALIDATION_WINDOW = 96, 336

series = generate_synthetic(
    SyntheticConfig(c1=0.5, c2=0.5, omega=5.0, noise_sd=0.1, seed=0,
                    length=BURN_IN + LAGS + TRAIN_WINDOW + VALIDATION_WINDOW + STEPS)
)
stream = build_features(series, LAGS)

init = HyperParams(
    CompositeKernel((PeriodicKernel(1.5e-3, 96.0), ArdKernel(np.full(LAGS, 1e-3))),
                    weights=[0.5, 0.5]),
    ridge=0.3,
)
feasible = FeasibleSet.for_kinds(
    init.scalar_kinds(),
    {"scale": (1.5e-6, 1.5e-2), "period": (48.0, 672.0), "ridge": (0.03, 3.0)},
)
schedule = Schedule(tune_every=672, fit_every=96,
                    train_window=TRAIN_WINDOW, validation_window=VALIDATION_WINDOW)

configs = {
    "OHL": TunerConfig(strategy=Strategy.OHL, init=init, feasible=feasible, eta=1e-6),
    "RANDOM": TunerConfig(strategy=Strategy.RANDOM, init=init, feasible=feasible,
                          draws=50, seed=0),
    "OFFLINE_GRAD": TunerConfig(strategy=Strategy.OFFLINE_GRAD, init=init,
                                feasible=feasible, eta=1e-4, tol=1e-12, max_iters=40),
    "FIXED": TunerConfig(strategy=Strategy.FIXED, init=init, feasible=feasible),
}

traces = {}
print(f"{'strategy':>13}  {'tuning fits':>11}  {'model fits':>10}  {'total':>6}  "
      f"{'final RMSE':>10}  {'wall s':>7}")
for name, config in configs.items():
    trace = run(config, schedule, stream, steps=STEPS)
    traces[name] = trace
    counts = fit_count_report(trace)
    rmse = float(np.sqrt(np.mean(trace.sq_errors())))
    wall = trace.tuning.wall_clock + trace.prediction.wall_clock
    print(f"{name:>13}  {counts['tuning']['fits']:>11}  {counts['prediction']['fits']:>10}  "
          f"{counts['total_fits']:>6}  {rmse:>10.3f}  {wall:>7.1f}")

ohl = traces["OHL"]
regret = RegretTrace()
for step in range(len(ohl)):
    regret = regret_update(regret, ohl.lambdas[step], ohl.gradients[step],
                           configs["OHL"].eta, feasible)
totals = np.asarray(regret.totals)
print("\nlocal regret rate R_T/T of the online run (should not grow):")
for t in (672, 1344, 2016, 2688):
    print(f"  T={t:>4}: {totals[t - 1] / t:.2f}")

# within-window gradient variation: evaluate one refit window's losses at a
# few feasible probe points and measure their spread around the window mean
rng = np.random.default_rng(0)
probes = [feasible.sample(rng) for _ in range(5)]
window_start = len(stream) - STEPS
m = schedule.fit_every
fields = []
for offset in range(m):
    i = window_start + offset
    grads = []
    for z in probes:
        hypers = init.from_vector(z)
        model = fit(hypers, stream.slice(i - TRAIN_WINDOW, i))
        jac = theta_jacobian(model)
        grads.append(loss_hyper_gradient(model, jac, stream.query(i),
                                         float(stream.targets[i])))
    fields.append(grads)
spread = variation_m(np.asarray(fields))
norms = np.linalg.norm(np.asarray(fields), axis=2)
print(f"\ngradient variation over one {m}-step window at 5 probe points: {spread:.3g}")
print(f"(per-step gradient norms there span {norms.min():.3g}..{norms.max():.3g}; "
      "bounded variation is what makes one averaged update per window sound)")
