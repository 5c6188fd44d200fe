"""End-to-end smart metering scenarios, with and without the overlay.

Two deployments are modeled. In the first, a monitoring device tracks
a meter application behind a single gateway; the baseline (overlay
off) routes every notification through the network SCL, while the
overlay variant discovers the producer, brings up one direct link and
subscribes peer to peer. In the second, the meter sits three gateway
domains away and the pre-seeded overlay chain already satisfies the
hop policy, so discovery succeeds without the hub and no new link is
needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

from .names import parse_name
from .ndn import fib_register
from .overlay import LinkDecision, LinkMetrics, Overlay, QosMetrics, QosPolicy
from .scl import (
    DiscoveryResult,
    M2mSystem,
    SclInstance,
    SclKind,
    Subscription,
    centralized_discover,
    create_application,
    create_container,
    create_content_instance,
    register_scl,
    subscribe_centralized,
)

SCENARIO_NAMES = ("usecase1", "usecase2")

NSCL_ID = "Nscl"
SUBSCRIBER_ID = "Dscl1"

# custom-topology escape hatch: (u, v, delay_ms, loss, capacity)
LinkSpec = Tuple[str, str, float, float, float]


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    oscl_enabled: bool = True
    appends: int = 5
    seed: int = 0
    probe_count: int = 8
    policy: QosPolicy = field(default_factory=QosPolicy)
    links: Optional[Tuple[LinkSpec, ...]] = None  # None = built-in topology

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.appends < 1:
            raise ValueError("appends must be >= 1")
        if self.probe_count < 1:
            raise ValueError("probe_count must be >= 1")


def _wire_links(overlay: Overlay, config: ScenarioConfig, defaults) -> bool:
    """Apply custom links when given; returns True when defaults ran."""
    if config.links is None:
        for u, v in defaults:
            overlay.add_link(u, v)
        return True
    for u, v, delay_ms, loss, capacity in config.links:
        overlay.add_link(u, v, LinkMetrics(delay_ms, loss, capacity))
    return False


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    system: M2mSystem
    overlay: Overlay
    producer: SclInstance
    subscriber: SclInstance
    app_uri: str
    container_uri: str
    discovery: Optional[DiscoveryResult] = None
    qos: Optional[QosMetrics] = None
    link_decision: Optional[LinkDecision] = None
    subscription: Optional[Subscription] = None
    new_links: int = 0


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    if config.scenario == "usecase1":
        return _run_usecase1(config)
    return _run_usecase2(config)


def _run_usecase1(config: ScenarioConfig) -> ScenarioResult:
    """Meter behind one gateway; the monitor lives on a device SCL."""
    system = M2mSystem()
    nscl = system.add_scl(SclKind.NSCL, NSCL_ID)
    gscl = system.add_scl(SclKind.GSCL, "Gscl1")
    dscl = system.add_scl(SclKind.DSCL, SUBSCRIBER_ID)
    register_scl(gscl, nscl)
    register_scl(dscl, nscl)

    create_application(gscl, "meter_app")
    create_container(gscl, "meter_app", "meter_data")
    create_application(dscl, "monitor_app")  # local registration only

    overlay = Overlay(system, seed=config.seed)
    for scl in (nscl, gscl, dscl):
        overlay.add_node(scl)
    # defaults to no initial links: the monitor knows nothing yet
    _wire_links(overlay, config, defaults=())

    result = ScenarioResult(
        config=config,
        system=system,
        overlay=overlay,
        producer=gscl,
        subscriber=dscl,
        app_uri="Gscl1/applications/meter_app",
        container_uri="Gscl1/applications/meter_app/containers/meter_data",
    )
    query = parse_name("meter_app")
    container_uri = parse_name(result.container_uri)

    if config.oscl_enabled:
        edges_before = overlay.graph.edge_count
        result.discovery = overlay.discover(
            dscl.node_id, query, scope=config.policy.max_path_hops, nscl=nscl
        )
        if result.discovery.path_hops not in (None, 0):
            result.qos = overlay.qos_monitor(result.discovery.path, config.probe_count)
        result.link_decision = overlay.ensure_link(
            dscl.node_id, result.discovery, config.policy, result.qos
        )
        result.new_links = overlay.graph.edge_count - edges_before
        result.subscription = overlay.p2p_subscribe(
            dscl.node_id, container_uri, expected_notifications=config.appends
        )
    else:
        result.discovery = centralized_discover(dscl, nscl, query)
        result.subscription = subscribe_centralized(dscl, nscl, container_uri)

    for i in range(config.appends):
        create_content_instance(gscl, "meter_app", "meter_data", f"reading-{i}")
    return result


def _run_usecase2(config: ScenarioConfig) -> ScenarioResult:
    """Meter three gateway domains away over an existing overlay chain."""
    system = M2mSystem()
    nscl = system.add_scl(SclKind.NSCL, NSCL_ID)
    gscl1 = system.add_scl(SclKind.GSCL, "Gscl1")
    gscl2 = system.add_scl(SclKind.GSCL, "Gscl2")
    gscl3 = system.add_scl(SclKind.GSCL, "Gscl3")
    dscl = system.add_scl(SclKind.DSCL, SUBSCRIBER_ID)
    for scl in (gscl1, gscl2, gscl3, dscl):
        register_scl(scl, nscl)

    create_application(gscl1, "electricity_meter")
    create_container(gscl1, "electricity_meter", "meter_data")
    create_application(dscl, "monitor_app")

    overlay = Overlay(system, seed=config.seed)
    for scl in (nscl, gscl1, gscl2, gscl3, dscl):
        overlay.add_node(scl)
    chain = (
        (dscl.node_id, gscl3.node_id),
        (gscl3.node_id, gscl2.node_id),
        (gscl2.node_id, gscl1.node_id),
    )
    if _wire_links(overlay, config, defaults=chain):
        # routes toward the producer domain, learned by earlier traffic
        fib_register(dscl.ndn, gscl1.base_name, gscl3.node_id)
        fib_register(gscl3.ndn, gscl1.base_name, gscl2.node_id)
        fib_register(gscl2.ndn, gscl1.base_name, gscl1.node_id)

    result = ScenarioResult(
        config=config,
        system=system,
        overlay=overlay,
        producer=gscl1,
        subscriber=dscl,
        app_uri="Gscl1/applications/electricity_meter",
        container_uri="Gscl1/applications/electricity_meter/containers/meter_data",
    )
    container_uri = parse_name(result.container_uri)

    if config.oscl_enabled:
        edges_before = overlay.graph.edge_count
        result.discovery = overlay.discover(
            dscl.node_id,
            parse_name(result.app_uri),
            scope=config.policy.max_path_hops,
            nscl=nscl,
        )
        if result.discovery.path_hops not in (None, 0):
            result.qos = overlay.qos_monitor(result.discovery.path, config.probe_count)
        result.link_decision = overlay.ensure_link(
            dscl.node_id, result.discovery, config.policy, result.qos
        )
        result.new_links = overlay.graph.edge_count - edges_before
        result.subscription = overlay.p2p_subscribe(
            dscl.node_id, container_uri, expected_notifications=config.appends
        )
    else:
        result.discovery = centralized_discover(dscl, nscl, parse_name("electricity_meter"))
        result.subscription = subscribe_centralized(dscl, nscl, container_uri)

    for i in range(config.appends):
        create_content_instance(gscl1, "electricity_meter", "meter_data", f"reading-{i}")
    return result
