"""Regenerates stats_oracle.json with scipy as the reference implementation."""
import json
import numpy as np
from scipy import stats

rng = np.random.default_rng(20240611)
welch, anova, shapiro, levene = [], [], [], []
for _ in range(50):
    na, nb = rng.integers(3, 40, size=2)
    a = rng.normal(rng.uniform(-2, 2), rng.uniform(0.2, 3), na)
    b = rng.normal(rng.uniform(-2, 2), rng.uniform(0.2, 3), nb)
    r = stats.ttest_ind(a, b, equal_var=False)
    s = stats.ttest_ind(a, b, equal_var=True)
    welch.append({"a": a.tolist(), "b": b.tolist(), "t": r.statistic, "p": r.pvalue,
                  "student_t": s.statistic, "student_p": s.pvalue})
    k = int(rng.integers(2, 7))
    groups = [rng.normal(rng.uniform(-1, 1), rng.uniform(0.3, 2), int(rng.integers(2, 25))) for _ in range(k)]
    f = stats.f_oneway(*groups)
    anova.append({"groups": [g.tolist() for g in groups], "f": f.statistic, "p": f.pvalue})
    x = rng.gamma(rng.uniform(0.5, 5), size=int(rng.integers(5, 60)))
    w = stats.shapiro(x)
    shapiro.append({"x": x.tolist(), "w": float(w.statistic), "p": float(w.pvalue)})
    lv = stats.levene(*groups, center="median")
    levene.append({"groups": [g.tolist() for g in groups], "f": lv.statistic, "p": lv.pvalue})

json.dump({"welch": welch, "anova": anova, "shapiro": shapiro, "brown_forsythe": levene},
          open("stats_oracle.json", "w"))
