"""
Clustering a synthetic two-view dataset
=======================================

Build a planted partition with two views, fit EquiNMF with the
data-derived weights, and cluster the shared embedding.
"""

import numpy as np

from equinmf import (
    SolverOptions,
    accuracy,
    combine_graphs,
    equinmf,
    heuristic_params,
    kmeans,
    knn_graph,
    make_synthetic,
    nmi,
    normalize_dataset,
)

# three clusters of 40 samples, seen through a 20- and a 30-feature view
data = make_synthetic(n_clusters=3, samples_per_cluster=40, dims=[20, 30], noise=0.3, seed=1)
print(data.n_views, "views,", data.n_samples, "samples, feature counts", data.feature_counts)

# EquiNMF expects unit L1 columns in every view
data = normalize_dataset(data, "l1_columns")

# one 5-NN graph per view, summed into the graph the solver regularizes with
graph = combine_graphs(knn_graph(view, k=5) for view in data.views)

# view weights are the feature counts and gamma balances the graph term
params, report = heuristic_params(data, graph, K=3)
print("alpha =", params.alpha, " gamma = %.4f" % params.gamma)

result = equinmf(data, graph, params, SolverOptions(K=3, seed=0))
print("iterations:", result.iterations_run, " final objective: %.6g" % result.final_objective)

# the rows of V are the sample embeddings; cluster them with k-means
labels = kmeans(result.V, 3, seed=0).labels
print("accuracy %.3f   nmi %.3f" % (accuracy(labels, data.labels), nmi(labels, data.labels)))

# the objective trace never goes up by more than rounding
trace = result.objective_trace
print("largest increase along the trace: %.2e" % max(0.0, np.max(np.diff(trace))))
