"""Simulate Bell-experiment correlations with contextuality hypergraphs.

Pipeline: compose the two single-party scenarios with the Foulis-Randall
product, sample outcomes under a constraint table, normalize the tally per
hyperedge, then evaluate correlations and the CHSH inequalities.
"""
from eprsim.analysis import (
    ChshReport,
    CorrelationVector,
    analyze,
    chsh_corrected_tests,
    chsh_values,
    correlations,
    no_signalling_residuals,
    signalling_delta,
)
from eprsim.presets import (
    classical_uniform,
    constraints_from_correlations,
    pr_box,
    tsirelson,
    validate_constraints,
)
from eprsim.sampling import (
    ConstraintTable,
    GlobalDistribution,
    Method,
    SamplerConfig,
    SamplingError,
    StarvedEdgeError,
    Tally,
    merge_tallies,
    metropolis_batch_run,
    normalize,
    rejection_sample_run,
    simulate,
)
from eprsim.scenario import (
    Scenario,
    bell_scenario,
    edges_containing,
    foulis_randall_product,
    make_local_scenario,
    validate_scenario,
    vertex_index,
)

__version__ = "0.1.0"
