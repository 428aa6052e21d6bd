from pidcoll.clients import LocalCollectionClient, LocalRegistryClient
from pidcoll.collection_service import CollectionService
from pidcoll.distributor import execute, plan
from pidcoll.registry import PidRegistry
from pidcoll.resolver import Resolver


def deposit_local(g, strategy, sampler=None):
    registry, service = PidRegistry(), CollectionService()
    rc, cc = LocalRegistryClient(registry, sampler), LocalCollectionClient(service, sampler)
    report = execute(plan(g, strategy), rc, cc)
    return registry, service, rc, cc, report


def resolve_local(g, strategy, mode="dedup", max_depth=None, roots=None):
    registry, service, rc, cc, _ = deposit_local(g, strategy)
    roots = [p.ref for p in (roots if roots is not None else g.roots)]
    return Resolver(rc, cc).resolve_provenance(roots, mode, max_depth)
