"""Placement, power, latency and feasibility model for a hybrid NTN O-RAN.

Units inside this module are fixed: watts, milliseconds, Mbps and GOPS.
Anything expressed in TOPS, km or Gbps is converted when parameters are built.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping

SPEED_OF_LIGHT_M_S = 2.998e8
NUM_SPLITS = 7

FUNCTIONS = ("PHY", "Low-MAC", "High-MAC", "Low-RLC", "High-RLC", "PDCP")


class NodeId(str, enum.Enum):
    GAT = "GAT"
    SAT = "SAT"
    HAP = "HAP"


NODE_ORDER = (NodeId.GAT, NodeId.SAT, NodeId.HAP)


class Side(str, enum.Enum):
    CU = "CU"
    DU = "DU"


# (cu, du) pairs in the order used by the placement action and the encoding.
PLACEMENTS = (
    (NodeId.GAT, NodeId.GAT),
    (NodeId.GAT, NodeId.SAT),
    (NodeId.SAT, NodeId.SAT),
    (NodeId.GAT, NodeId.HAP),
    (NodeId.HAP, NodeId.HAP),
)
PLACEMENT_NAMES = ("mono@GAT", "GAT/SAT", "mono@SAT", "GAT/HAP", "mono@HAP")


@dataclass(frozen=True)
class SplitOption:
    """One CU/DU functional split: function partition, latency budget, feeder demand.

    Feeder demand is ``traffic_slope * lambda_ru + traffic_offset`` in Mbps; a
    constant demand has slope 0.
    """

    index: int
    du_functions: frozenset
    cu_functions: frozenset
    latency_req_ms: float
    traffic_slope: float
    traffic_offset: float

    def traffic(self, lambda_ru: float) -> float:
        return self.traffic_slope * lambda_ru + self.traffic_offset


def split_catalog(relaxed_latency_ms: float = 10.0) -> list[SplitOption]:
    """Return the seven split options, option 0 keeping everything in the DU.

    Options 1 and 2 carry a latency range in the source table; they get
    ``relaxed_latency_ms``.
    """
    stack = FUNCTIONS
    # number of functions (from the bottom of the stack) kept in the DU
    du_depth = (6, 5, 4, 3, 2, 1, 0)
    latency = (10.0, relaxed_latency_ms, relaxed_latency_ms, 0.1, 0.1, 0.25, 0.25)
    demand = ((1.0, 0.0), (1.0, 0.0), (1.0, 0.0), (1.0, 0.0), (1.02, 1.5), (1.02, 1.5), (0.0, 2500.0))
    return [
        SplitOption(
            index=o,
            du_functions=frozenset(stack[: du_depth[o]]),
            cu_functions=frozenset(stack[du_depth[o]:]),
            latency_req_ms=latency[o],
            traffic_slope=demand[o][0],
            traffic_offset=demand[o][1],
        )
        for o in range(NUM_SPLITS)
    ]


@dataclass(frozen=True)
class FunctionLoads:
    """Per-function computational load in GOPS.

    MAC and RLC are each divided into a low and a high part by a fraction.
    """

    comp_phy: float = 1280.0
    comp_mac: float = 50.0
    comp_rlc: float = 50.0
    comp_pdcp: float = 100.0
    low_mac_fraction: float = 0.5
    low_rlc_fraction: float = 0.5

    def __post_init__(self):
        for name in ("comp_phy", "comp_mac", "comp_rlc", "comp_pdcp"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("low_mac_fraction", "low_rlc_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def of(self, function: str) -> float:
        table = {
            "PHY": self.comp_phy,
            "Low-MAC": self.comp_mac * self.low_mac_fraction,
            "High-MAC": self.comp_mac * (1.0 - self.low_mac_fraction),
            "Low-RLC": self.comp_rlc * self.low_rlc_fraction,
            "High-RLC": self.comp_rlc * (1.0 - self.low_rlc_fraction),
            "PDCP": self.comp_pdcp,
        }
        return table[function]

    @property
    def total(self) -> float:
        return self.comp_phy + self.comp_mac + self.comp_rlc + self.comp_pdcp


@dataclass(frozen=True)
class NodeParams:
    idle_power_w: float
    epo_j_per_to: float
    comp_max_gops: float

    def __post_init__(self):
        if min(self.idle_power_w, self.epo_j_per_to, self.comp_max_gops) <= 0:
            raise ValueError(f"node parameters must be positive: {self}")


@dataclass(frozen=True)
class LinkParams:
    endpoints: tuple
    distance_m: float
    capacity_mbps: float
    tx_power_w: float

    def __post_init__(self):
        if min(self.distance_m, self.capacity_mbps, self.tx_power_w) <= 0:
            raise ValueError(f"link parameters must be positive: {self}")

    @property
    def key(self) -> frozenset:
        return frozenset(self.endpoints)


@dataclass(frozen=True)
class Configuration:
    """CU host, DU host and split index. Only the five placements in PLACEMENTS are valid."""

    cu_node: NodeId
    du_node: NodeId
    split: int

    def __post_init__(self):
        object.__setattr__(self, "cu_node", NodeId(self.cu_node))
        object.__setattr__(self, "du_node", NodeId(self.du_node))
        if (self.cu_node, self.du_node) not in PLACEMENTS:
            raise ValueError(f"invalid CU/DU placement {self.cu_node.value}/{self.du_node.value}")
        if not 0 <= self.split < NUM_SPLITS:
            raise ValueError(f"split index {self.split} outside [0, {NUM_SPLITS - 1}]")

    @classmethod
    def from_placement(cls, placement: int, split: int) -> "Configuration":
        cu, du = PLACEMENTS[placement]
        return cls(cu, du, split)

    @property
    def monolithic(self) -> bool:
        return self.cu_node == self.du_node

    @property
    def placement(self) -> int:
        return PLACEMENTS.index((self.cu_node, self.du_node))

    @property
    def index(self) -> int:
        """Dense index in [0, 35): placement-major."""
        return self.placement * NUM_SPLITS + self.split

    def __str__(self):
        return f"{PLACEMENT_NAMES[self.placement]}/o{self.split}"


def all_configurations() -> list[Configuration]:
    return [Configuration.from_placement(p, o) for p in range(len(PLACEMENTS)) for o in range(NUM_SPLITS)]


@dataclass(frozen=True)
class PowerBreakdown:
    processing_w: float
    transmission_w: float
    total_w: float


@dataclass(frozen=True)
class FeasibilityReport:
    latency_ok: bool
    traffic_ok: bool
    compute_ok: bool

    @property
    def feasible(self) -> bool:
        return self.latency_ok and self.traffic_ok and self.compute_ok


def _default_nodes() -> dict:
    return {
        NodeId.GAT: NodeParams(idle_power_w=36.0, epo_j_per_to=0.0742, comp_max_gops=485_000.0),
        NodeId.SAT: NodeParams(idle_power_w=10.0, epo_j_per_to=0.625, comp_max_gops=32_000.0),
        NodeId.HAP: NodeParams(idle_power_w=7.5, epo_j_per_to=5.64, comp_max_gops=1_330.0),
    }


def _default_links() -> dict:
    links = (
        LinkParams((NodeId.SAT, NodeId.GAT), distance_m=600e3, capacity_mbps=100.0, tx_power_w=35.0),
        LinkParams((NodeId.HAP, NodeId.GAT), distance_m=20e3, capacity_mbps=10_000.0, tx_power_w=4.0),
    )
    return {link.key: link for link in links}


@dataclass(frozen=True)
class NetworkParams:
    """Everything the model needs: nodes, feeder links, function loads, split catalog.

    ``backhaul_mode`` charges a monolithic NTN gNB feeder transmission at
    ``lambda_ru`` and checks that rate against the feeder capacity.
    ``single_monolithic_capacity`` bounds a monolithic node by its own
    capacity instead of the doubled ``COMP_max,c + COMP_max,d`` sum.
    """

    nodes: Mapping = field(default_factory=_default_nodes)
    links: Mapping = field(default_factory=_default_links)
    loads: FunctionLoads = field(default_factory=FunctionLoads)
    catalog: tuple = field(default_factory=lambda: tuple(split_catalog()))
    backhaul_mode: bool = False
    single_monolithic_capacity: bool = False

    def node(self, node_id) -> NodeParams:
        return self.nodes[NodeId(node_id)]

    def link(self, a, b) -> LinkParams:
        try:
            return self.links[frozenset((NodeId(a), NodeId(b)))]
        except KeyError:
            raise ValueError(f"no link parameters for {NodeId(a).value}-{NodeId(b).value}") from None

    def feeder_link(self, cfg: Configuration) -> LinkParams | None:
        """Link carrying the split traffic, or None for a monolithic gNB."""
        if not cfg.monolithic:
            return self.link(cfg.cu_node, cfg.du_node)
        if self.backhaul_mode and cfg.cu_node != NodeId.GAT:
            return self.link(cfg.cu_node, NodeId.GAT)
        return None

    def scaled_power(self, k: float) -> "NetworkParams":
        """Copy with every power-like constant (idle, EPO, transmit) multiplied by k."""
        nodes = {
            n: replace(p, idle_power_w=p.idle_power_w * k, epo_j_per_to=p.epo_j_per_to * k)
            for n, p in self.nodes.items()
        }
        links = {key: replace(link, tx_power_w=link.tx_power_w * k) for key, link in self.links.items()}
        return replace(self, nodes=nodes, links=links)


def default_params(**overrides) -> NetworkParams:
    return NetworkParams(**overrides)


def traffic_demand(split: int, lambda_ru: float, params: NetworkParams | None = None) -> float:
    """Feeder traffic in Mbps induced by a split at RU load ``lambda_ru``."""
    if lambda_ru < 0:
        raise ValueError(f"lambda_ru must be >= 0, got {lambda_ru}")
    catalog = params.catalog if params is not None else split_catalog()
    return catalog[split].traffic(lambda_ru)


def computational_load(split: int, side: Side, loads: FunctionLoads, catalog=None) -> float:
    """GOPS hosted on one side of the split."""
    option = (catalog or split_catalog())[split]
    functions = option.cu_functions if Side(side) == Side.CU else option.du_functions
    return sum(loads.of(f) for f in FUNCTIONS if f in functions)


def propagation_latency(cfg: Configuration, params: NetworkParams) -> float:
    """CU-DU propagation delay in ms; zero for a monolithic gNB."""
    if cfg.monolithic:
        return 0.0
    link = params.link(cfg.cu_node, cfg.du_node)
    return link.distance_m / SPEED_OF_LIGHT_M_S * 1e3


def processing_power(cfg: Configuration, params: NetworkParams) -> float:
    loads = params.loads
    cu, du = params.node(cfg.cu_node), params.node(cfg.du_node)
    # a monolithic gNB merges the CU and DU idle power into one server
    idle_weight = 0.5 if cfg.monolithic else 1.0
    comp_cu = computational_load(cfg.split, Side.CU, loads, params.catalog) / 1e3
    comp_du = computational_load(cfg.split, Side.DU, loads, params.catalog) / 1e3
    p_cu = cu.idle_power_w * idle_weight + cu.epo_j_per_to * comp_cu
    p_du = du.idle_power_w * idle_weight + du.epo_j_per_to * comp_du
    return p_cu + p_du


def feeder_traffic(cfg: Configuration, lambda_ru: float, params: NetworkParams) -> float:
    """Traffic actually carried on the feeder link (Mbps)."""
    if cfg.monolithic:
        return float(lambda_ru) if params.feeder_link(cfg) is not None else 0.0
    return traffic_demand(cfg.split, lambda_ru, params)


def transmission_power(cfg: Configuration, lambda_ru: float, params: NetworkParams) -> float:
    if lambda_ru < 0:
        raise ValueError(f"lambda_ru must be >= 0, got {lambda_ru}")
    link = params.feeder_link(cfg)
    if link is None:
        return 0.0
    return link.tx_power_w / link.capacity_mbps * feeder_traffic(cfg, lambda_ru, params)


def total_power(cfg: Configuration, lambda_ru: float, params: NetworkParams) -> PowerBreakdown:
    p_proc = processing_power(cfg, params)
    p_tx = transmission_power(cfg, lambda_ru, params)
    return PowerBreakdown(processing_w=p_proc, transmission_w=p_tx, total_w=p_proc + p_tx)


def check_constraints(cfg: Configuration, lambda_ru: float, params: NetworkParams) -> FeasibilityReport:
    option = params.catalog[cfg.split]
    latency_ok = propagation_latency(cfg, params) <= option.latency_req_ms

    link = params.feeder_link(cfg)
    traffic_ok = link is None or feeder_traffic(cfg, lambda_ru, params) <= link.capacity_mbps

    load = computational_load(cfg.split, Side.CU, params.loads, params.catalog) + computational_load(
        cfg.split, Side.DU, params.loads, params.catalog
    )
    capacity = params.node(cfg.cu_node).comp_max_gops + params.node(cfg.du_node).comp_max_gops
    if cfg.monolithic and params.single_monolithic_capacity:
        capacity = params.node(cfg.cu_node).comp_max_gops
    compute_ok = load <= capacity
    return FeasibilityReport(latency_ok, traffic_ok, compute_ok)
