"""Property testers for list H-homomorphism, with exact oracles and a measurement harness."""
from .algebra import Detail, Tier, classify, find_conservative_majority, full_hom_to_k2
from .errors import (FarUnreachable, HomtestError, NoSublinearTester, OracleBudgetExceeded,
                     SchemaError, SizeGuardExceeded, Unsatisfiable)
from .minimality import run_minimality, violations
from .solver import distance_to_property, enumerate_list_homs, relation_between
from .structures import (AssignmentOracle, Graph, Instance, connected_components, load_assignment,
                         load_graph, load_instance, restrict, weighted_distance)
from .testers import TesterConfig, Verdict, test

__all__ = [
    "AssignmentOracle", "Detail", "FarUnreachable", "Graph", "HomtestError", "Instance",
    "NoSublinearTester", "OracleBudgetExceeded", "SchemaError", "SizeGuardExceeded", "TesterConfig",
    "Tier", "Unsatisfiable", "Verdict", "classify", "connected_components", "distance_to_property",
    "enumerate_list_homs", "find_conservative_majority", "full_hom_to_k2", "load_assignment",
    "load_graph", "load_instance", "relation_between", "restrict", "run_minimality", "test",
    "violations", "weighted_distance",
]
