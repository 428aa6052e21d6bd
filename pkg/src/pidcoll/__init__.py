"""Testbed for placing backbone provenance in PID records or in a collection service."""

from .bench import BenchConfig, BenchReport, compute_communication, emit_report, run_matrix
from .clients import RequestKind
from .collection_service import CollectionDescriptor, CollectionService, MemberDescriptor
from .costmodel import Calibration, CostModel, CostSampler
from .distributor import DepositPlan, Strategy, decode_deposit, execute, plan
from .graphgen import Case, GenParams, generate
from .model import (
    ObjectGraph,
    ObjectNode,
    Pid,
    ProvenanceBlock,
    ProvenanceEdge,
    Relation,
    reachable,
    topological_order,
    validate_graph,
)
from .registry import PidKernelRecord, PidRegistry
from .resolver import ResolvedGraph, Resolver
from .store import KVStore

__version__ = "0.1.0"

__all__ = [
    "BenchConfig", "BenchReport", "Calibration", "Case", "CollectionDescriptor", "CollectionService",
    "CostModel", "CostSampler", "DepositPlan", "GenParams", "KVStore", "MemberDescriptor", "ObjectGraph",
    "ObjectNode", "Pid", "PidKernelRecord", "PidRegistry", "ProvenanceBlock", "ProvenanceEdge",
    "Relation", "RequestKind", "ResolvedGraph", "Resolver", "Strategy", "compute_communication",
    "decode_deposit", "emit_report", "execute", "generate", "plan", "reachable", "run_matrix",
    "topological_order", "validate_graph",
]
