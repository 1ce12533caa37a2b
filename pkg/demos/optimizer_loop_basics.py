"""Drive the line optimizer by hand on a toy 2-D objective.

The optimizer never sees numbers, only which of two actions we liked
better, yet the proposals drift toward the peak at (0.7, 0.3).
"""
import numpy as np

from prefline import FeedbackBundle, LineOptimizer, Preference


def utility(coords):
    return -(coords[0] - 0.7) ** 2 - (coords[1] - 0.3) ** 2


opt = LineOptimizer(dims=2, granularity=30, rng=np.random.default_rng(0))

previous = None
for t in range(1, 41):
    action = opt.propose_next()

    # answer like a subject would: compare the new action with the last one
    if previous is None:
        pref = Preference.NO_PREFERENCE
    elif utility(action.coords) > utility(previous.coords):
        pref = Preference.FIRST_PREFERRED
    else:
        pref = Preference.SECOND_PREFERRED
    opt.absorb_feedback(action, FeedbackBundle(pref))

    if t % 10 == 0:
        x, y = action.coords
        print(f"t={t:3d}  proposed ({x:.3f}, {y:.3f})  "
              f"utility {utility(action.coords):+.4f}")
    previous = action

best = opt.posterior_max()
print(f"\nbelieved best after 40 comparisons: ({best.coords[0]:.3f}, "
      f"{best.coords[1]:.3f}), true utility {utility(best.coords):+.4f}")
print("true peak sits at (0.700, 0.300) with utility +0.0000")
