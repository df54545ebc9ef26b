"""
Checking the equal-contribution weights
=======================================

The heuristic picks the view weights and the graph weight so that, for
random nonnegative factors, every view and the graph pull on the update
about equally. Here we measure those pulls directly at the initial
factors.
"""

import numpy as np

from equinmf import combine_graphs, init_factors, knn_graph, make_synthetic, normalize_dataset
from equinmf.graph import mean_weight
from equinmf.heuristics import expected_contribution_check, heuristic_params

# two views of very different width
data = normalize_dataset(make_synthetic(4, 25, [10, 80], noise=0.5, seed=3), "l1_columns")
graph = combine_graphs(knn_graph(v, 5) for v in data.views)

params, report = heuristic_params(data, graph, K=4)
print("alpha:", params.alpha)
print("mean graph weight %.5f -> gamma %.4f" % (mean_weight(graph), params.gamma))

# gamma * N * mean weight reproduces n_views * K
print("gamma * N * mean_weight = %.12f  (n_views * K = %d)"
      % (params.gamma * data.n_samples * mean_weight(graph), data.n_views * 4))

init = init_factors(data, 4, seed=0)
check = expected_contribution_check(data, init, params.alpha, params.gamma, graph)
print("per-view mean contribution:", np.round(check["view_means"], 4))
print("view ratio %.3f, graph-to-data ratio %.3f" % (check["view_ratio"], check["graph_to_data"]))

# with unit weights the wide view dominates
flat = expected_contribution_check(data, init, (1.0, 1.0), params.gamma, graph)
print("unit alpha instead gives view ratio %.3f" % flat["view_ratio"])
