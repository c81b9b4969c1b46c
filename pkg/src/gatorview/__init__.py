"""Incremental maintenance of typed graph views with generalized discrimination networks."""
from .errors import GatorError
from .graph import ChangeEvent, Edge, EdgeTypeDef, Graph, Node, NodeTypeDef, TypeGraph, apply_change, backward_marks, type_conforms
from .maintenance import MaintenanceReport, Maintainer, batch_maintain, maintain, view_signature
from .network import (
    And,
    Atomic,
    Connector,
    Cycle,
    ExecutionPlan,
    Network,
    Not,
    Or,
    ViewModule,
    Wire,
    build_network,
    emulate_rete,
    lower_condition,
    plan_execution,
)
from .pattern import (
    AttrPredicate,
    MarkingSpec,
    Match,
    Pattern,
    PatternEdge,
    PatternNode,
    RoleSpec,
    execute_create,
    execute_delete,
    execute_update,
    find_matches,
)

__version__ = "0.1.0"

__all__ = [
    "And",
    "Atomic",
    "AttrPredicate",
    "ChangeEvent",
    "Connector",
    "Cycle",
    "Edge",
    "EdgeTypeDef",
    "ExecutionPlan",
    "GatorError",
    "Graph",
    "Maintainer",
    "MaintenanceReport",
    "MarkingSpec",
    "Match",
    "Network",
    "Node",
    "NodeTypeDef",
    "Not",
    "Or",
    "Pattern",
    "PatternEdge",
    "PatternNode",
    "RoleSpec",
    "TypeGraph",
    "ViewModule",
    "Wire",
    "apply_change",
    "backward_marks",
    "batch_maintain",
    "build_network",
    "emulate_rete",
    "execute_create",
    "execute_delete",
    "execute_update",
    "find_matches",
    "lower_condition",
    "maintain",
    "plan_execution",
    "type_conforms",
    "view_signature",
]
