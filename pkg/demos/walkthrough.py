"""A small evacuation instance from start to finish.

Five towns sit along a road.  Their populations are uncertain: each is a
linear function of one scenario parameter t in [0, 1], and the two ends move
in opposite directions.  We look for the shelter position whose worst-case
excess over the best-in-hindsight shelter is smallest.
"""
import numpy as np

from mmrsink import RegretModel, SinkLocation, aggregate_time, solve
from mmrsink.network import ParametricPathNetwork

net = ParametricPathNetwork.build(
    a=[4.0, 1.0, 2.0, 1.0, 0.5],
    b=[-3.0, 0.5, 0.0, 0.5, 3.5],
    lengths=[2.0, 1.0, 1.5, 2.0],
    capacities=[2.0, 1.0, 3.0, 1.5],
    tau=1.0,
)
print("town positions:", net.positions)
for t in (0.0, 0.5, 1.0):
    print(f"populations at t={t}:", np.round(net.weights_at(t), 3))

# The aggregate evacuation time of a fixed shelter is piecewise quadratic in t.
model = RegretModel(net)
print("\nside functions per edge (pieces):",
      [(f.n_pieces, g.n_pieces) for f, g in zip(model.F_L, model.F_R)])
print("best achievable time Opt(t) has", model.opt.n_pieces, "pieces, realized by towns", model.opt.tags)

# A fixed shelter at the middle town is sometimes good and sometimes bad.
mid = SinkLocation.vertex(2)
for t in (0.0, 0.5, 1.0):
    phi = aggregate_time(net, mid, t)
    print(f"t={t}: shelter at town 2 takes {phi:.3f}, best possible {float(model.opt(t)):.3f}")

# Maximum regret along the road, then the exact minimizer.
xs = np.linspace(0, net.total_length, 9)
print("\nmax regret along the road:")
for x, v in zip(xs, model.mr(xs)):
    print(f"  x={x:5.2f}  MR={v:.4f}")

result = solve(net, model)
print("\nminmax-regret shelter:", result.sink.to_dict(net))
print("its maximum regret:", round(result.max_regret, 6))
