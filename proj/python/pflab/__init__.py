"""Power flow solvers, dataset generation, and learned surrogates."""

from ._pflab import (
    Dataset,
    NetworkCase,
    PFSolution,
    TrainedModel,
    __version__,
    evaluate,
    evaluate_dcpf,
    generate,
    load_case,
    load_model,
    parse_case,
    read_dataset,
    save_model,
    solve_acpf,
    solve_dcpf,
    train,
    write_dataset,
)

__all__ = [
    "Dataset",
    "NetworkCase",
    "PFSolution",
    "TrainedModel",
    "__version__",
    "evaluate",
    "evaluate_dcpf",
    "generate",
    "load_case",
    "load_model",
    "parse_case",
    "read_dataset",
    "save_model",
    "solve_acpf",
    "solve_dcpf",
    "train",
    "write_dataset",
]
