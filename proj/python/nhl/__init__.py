"""Taxonomy-branched classification networks with extractable experts."""

from ._nhl import (  # noqa: F401
    BranchConfig,
    ComputeGraph,
    EquivalenceReport,
    IoError,
    ParameterStore,
    Taxonomy,
    ValidationError,
    build_baseline_resnet50,
    build_nhl,
    build_trunk,
    count_macs,
    count_params,
    expert_count,
    export_report,
    extract_expert,
    forward,
    infer_shapes,
    init_parameters,
    load_checkpoint_into,
    oracle_mac_count,
    topo_order,
    verify_logit_equivalence,
)

__all__ = [
    "BranchConfig",
    "ComputeGraph",
    "EquivalenceReport",
    "IoError",
    "ParameterStore",
    "Taxonomy",
    "ValidationError",
    "build_baseline_resnet50",
    "build_nhl",
    "build_trunk",
    "count_macs",
    "count_params",
    "expert_count",
    "export_report",
    "extract_expert",
    "forward",
    "infer_shapes",
    "init_parameters",
    "load_checkpoint_into",
    "oracle_mac_count",
    "topo_order",
    "verify_logit_equivalence",
]
