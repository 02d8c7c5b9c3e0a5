"""Layered network construction over five-element neurons.

A network is a stack of layers.  Within each neuron the 5 elements are
assigned roles per propagation direction: input (receives signal), output
(emits signal), or unused.  Edges connect an output-role element of one
neuron to an input-role element of a neuron in the next layer.  Fan-out
copies, fan-in sums.

Wiring modes:

* ``paper``: the boundaries touching the first and last layers are fully
  connected (every source neuron's output elements feed a designated input
  element on every destination neuron), interior boundaries are wired by
  uniform random matching of output elements to input elements.
* ``random``: random matching at every boundary.
* ``dense_in``: only the feature boundary is fully connected.
* ``spread``: every input element draws ``fan_in`` distinct sources; roles
  are pinned to one anchor input and one follow output per neuron.
* ``contrast``: spread's anchor/follow pair plus an opposing input port
  three ring steps past the anchor; each anchor draws ``fan_in`` sources
  and each opposing port draws ``INHIBIT_FAN_RATIO * fan_in`` different
  ones.  At the class boundary every class draws its anchor sources from a
  private slice of the penultimate layer and its opposing sources from the
  other slices.

All randomness comes from ``numpy.random.Generator(PCG64(seed))`` and is
consumed in a fixed documented order (see build_network), so a seed pins
the topology byte-for-byte across platforms.

The first layer exposes one external input port per neuron (a feature is
injected there); the last layer exposes one external output port per neuron
(class signals are read there).  ``reverse`` flips the whole graph for the
backward pass and is an involution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import N_ELEMENTS

ROLE_UNUSED = 0
ROLE_INPUT = 1
ROLE_OUTPUT = 2

# contrast wiring: inhibitory draws per input, as a multiple of fan_in
INHIBIT_FAN_RATIO = 2

SERIAL_VERSION = 1

DEFAULT_INIT = (1.0, 0.5, 0.5)


class TopologyError(ValueError):
    """Raised when a network cannot be built as requested."""


@dataclass(frozen=True)
class Violation:
    """One validation failure, localized to a neuron/element when possible."""

    code: str
    message: str
    neuron: int | None = None
    element: int | None = None


@dataclass(frozen=True)
class NetworkGraph:
    """Immutable layered network: roles, edges, per-neuron parameters.

    Arrays are read-only.  ``roles`` is (N, 5) with ROLE_* values for the
    graph's own direction; ``edges`` is (E, 4) rows of
    (src_neuron, src_element, dst_neuron, dst_element) in canonical sorted
    order; ``k1``/``k2``/``k3`` are (N, 5) parameter stacks.  External maps
    go port index -> (neuron, element).
    """

    layer_sizes: tuple
    roles: np.ndarray
    edges: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    k3: np.ndarray
    external_inputs: dict
    external_outputs: dict
    seed: int
    wiring: str
    direction: str = "forward"
    fan_in: tuple = ()
    layer_of: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = int(sum(self.layer_sizes))
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        fans = self.fan_in if hasattr(self.fan_in, "__len__") \
            else (self.fan_in,) * (len(self.layer_sizes) - 1)
        object.__setattr__(self, "fan_in", tuple(int(f) for f in fans))
        roles = np.ascontiguousarray(np.asarray(self.roles, dtype=np.int8))
        edges = np.ascontiguousarray(np.asarray(self.edges, dtype=np.int32).reshape(-1, 4))
        if roles.shape != (n, N_ELEMENTS):
            raise ValueError(f"roles must have shape ({n}, 5), got {roles.shape}")
        layer_of = np.repeat(np.arange(len(self.layer_sizes), dtype=np.int32),
                             self.layer_sizes)
        ks = {}
        for name in ("k1", "k2", "k3"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            if arr.shape != (n, N_ELEMENTS):
                raise ValueError(f"{name} must have shape ({n}, 5), got {arr.shape}")
            ks[name] = arr
        for name, arr in [("roles", roles), ("edges", edges), ("layer_of", layer_of),
                          ("k1", ks["k1"]), ("k2", ks["k2"]), ("k3", ks["k3"])]:
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "external_inputs",
                           {int(k): (int(v[0]), int(v[1]))
                            for k, v in sorted(self.external_inputs.items())})
        object.__setattr__(self, "external_outputs",
                           {int(k): (int(v[0]), int(v[1]))
                            for k, v in sorted(self.external_outputs.items())})

    @property
    def n_neurons(self) -> int:
        return int(self.roles.shape[0])

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes)

    def layer_slice(self, layer: int) -> slice:
        start = int(np.sum(self.layer_sizes[:layer]))
        return slice(start, start + self.layer_sizes[layer])

    def layer_neurons(self, layer: int) -> np.ndarray:
        s = self.layer_slice(layer)
        return np.arange(s.start, s.stop)

    def input_elements(self, neuron: int) -> np.ndarray:
        return np.flatnonzero(self.roles[neuron] == ROLE_INPUT)

    def output_elements(self, neuron: int) -> np.ndarray:
        return np.flatnonzero(self.roles[neuron] == ROLE_OUTPUT)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NetworkGraph):
            return NotImplemented
        return (self.layer_sizes == other.layer_sizes
                and self.seed == other.seed
                and self.wiring == other.wiring
                and self.fan_in == other.fan_in
                and self.direction == other.direction
                and np.array_equal(self.roles, other.roles)
                and np.array_equal(self.edges, other.edges)
                and np.array_equal(self.k1, other.k1)
                and np.array_equal(self.k2, other.k2)
                and np.array_equal(self.k3, other.k3)
                and self.external_inputs == other.external_inputs
                and self.external_outputs == other.external_outputs)

    __hash__ = None


def _draw_role_counts(rng, layer: int, n_layers: int, assign_all: bool):
    # First-layer neurons carry exactly one external feature port; last-layer
    # neurons carry exactly one class port.
    if assign_all:
        if layer == 0:
            n_in = 1
        elif layer == n_layers - 1:
            n_in = 4
        else:
            n_in = int(rng.integers(1, 5))
        n_out = N_ELEMENTS - n_in
    else:
        n_in = 1 if layer == 0 else int(rng.integers(1, 3))
        n_out = 1 if layer == n_layers - 1 else int(rng.integers(1, 3))
    return n_in, n_out


def _assign_roles(rng, roles, i, layer, n_layers, assign_all, style):
    """Fill roles[i]; returns (primary_in, primary_out) for wiring.

    Every neuron anchors its roles so the primary emitting element sits one
    generative step downstream of the primary receiving element: drive
    entering element a raises element a+1, so positive drive yields a
    positive emission at every hop and a positive class reading.  Without
    the anchor, responses read at random ring offsets carry mixed signs and
    summed layer signals cancel instead of propagating.

    ``style`` "lean" pins every neuron to the anchor/follow pair alone, so
    each edge couples an anchor to a follow element and transfer stays
    positive in both passes.  "contrast" keeps the lean pair and adds a
    second receiving element three steps past the anchor on every layer but
    the first: drive landing there lowers the follow emission, giving each
    neuron an opposing channel while all coupled signals stay positive.
    "free" draws role counts per neuron.
    """
    if style == "free":
        n_in, n_out = _draw_role_counts(rng, layer, n_layers, assign_all)
    else:
        n_in, n_out = 1, 1
    anchor = int(rng.integers(N_ELEMENTS))
    follow = (anchor + 1) % N_ELEMENTS
    rest = [el for el in rng.permutation(N_ELEMENTS)
            if el not in (anchor, follow)]
    roles[i, anchor] = ROLE_INPUT
    roles[i, follow] = ROLE_OUTPUT
    if style == "contrast" and layer > 0:
        roles[i, (anchor + 3) % N_ELEMENTS] = ROLE_INPUT
    for el in rest[:n_in - 1]:
        roles[i, el] = ROLE_INPUT
    for el in rest[n_in - 1:n_in - 1 + n_out - 1]:
        roles[i, el] = ROLE_OUTPUT
    return anchor, follow


def build_network(layer_sizes, wiring: str = "paper", seed: int = 0,
                  init_params=DEFAULT_INIT,
                  assign_all_elements: bool = False,
                  fan_in=4) -> NetworkGraph:
    """Construct a layered network deterministically from (args, seed).

    ``fan_in`` only matters for "spread" and "contrast" wiring: each anchor
    element draws that many distinct sources from the boundary upstream of
    it (contrast opposing ports draw INHIBIT_FAN_RATIO times as many).  It
    can be a single int or one value per layer boundary, letting early
    boundaries stay wide (signal amplitude) while the class boundary stays
    narrow (distinct per-class source sets).  Both modes pin role draws
    (see _assign_roles), which keeps edge transfer sign-consistent in both
    passes.

    PRNG draw order, fixed for reproducibility: for each neuron in index
    order (layer-major), the role-count draws, then one anchor draw plus
    one 5-permutation; then for each layer boundary in order, the wiring
    draws (random matching: one destination draw per output element, then
    one source draw per uncovered input element; full boundaries: one
    source draw per non-primary input element; spread: one choice draw per
    input element, then one destination draw per stranded output element;
    contrast: per destination one or two anchor-pool choices (class block
    or stripe plus extras) then one opposing-pool choice, then one
    destination draw per stranded source away from the class boundary).
    """
    layer_sizes = tuple(int(s) for s in layer_sizes)
    if len(layer_sizes) < 2:
        raise TopologyError("need at least 2 layers")
    if any(s < 1 for s in layer_sizes):
        raise TopologyError("every layer needs at least 1 neuron")
    if wiring not in ("paper", "random", "dense_in", "spread", "contrast"):
        raise TopologyError(f"unknown wiring mode {wiring!r}")
    n_layers = len(layer_sizes)
    fans = tuple(int(f) for f in fan_in) if hasattr(fan_in, "__len__") \
        else (int(fan_in),) * (n_layers - 1)
    if len(fans) != n_layers - 1:
        raise TopologyError(
            f"fan_in needs one value per boundary ({n_layers - 1}), "
            f"got {len(fans)}")
    if any(f < 1 for f in fans):
        raise TopologyError("fan_in must be >= 1")
    n = sum(layer_sizes)
    rng = np.random.Generator(np.random.PCG64(int(seed)))

    roles = np.zeros((n, N_ELEMENTS), dtype=np.int8)
    layer_of = np.repeat(np.arange(n_layers), layer_sizes)
    primary_in = np.zeros(n, dtype=np.int64)
    primary_out = np.zeros(n, dtype=np.int64)
    style = {"spread": "lean", "contrast": "contrast"}.get(wiring, "free")
    for i in range(n):
        primary_in[i], primary_out[i] = _assign_roles(
            rng, roles, i, int(layer_of[i]), n_layers, assign_all_elements,
            style)

    in_elems = [np.flatnonzero(roles[i] == ROLE_INPUT) for i in range(n)]
    out_elems = [np.flatnonzero(roles[i] == ROLE_OUTPUT) for i in range(n)]

    starts = np.concatenate([[0], np.cumsum(layer_sizes)])
    edge_rows = []
    for b in range(n_layers - 1):
        src = np.arange(starts[b], starts[b + 1])
        dst = np.arange(starts[b + 1], starts[b + 2])
        # "paper" saturates both outer boundaries; "dense_in" keeps only the
        # feature boundary dense so class fan-in stays sparse and distinct
        # per class; "spread" draws fan_in sources for every input element;
        # "contrast" splits draws between anchor and opposing ports;
        # "random" matches everywhere.
        full = (wiring == "paper" and (b == 0 or b == n_layers - 2)) \
            or (wiring == "dense_in" and b == 0)
        if full:
            for s in src:
                for oe in out_elems[s]:
                    for d in dst:
                        edge_rows.append((s, oe, d, primary_in[d]))
            for d in dst:
                for ie in in_elems[d]:
                    if ie == primary_in[d]:
                        continue
                    s = src[int(rng.integers(len(src)))]
                    edge_rows.append((s, primary_out[s], d, ie))
        elif wiring == "spread":
            outputs = [(s, oe) for s in src for oe in out_elems[s]]
            inputs = [(d, ie) for d in dst for ie in in_elems[d]]
            if not outputs or not inputs:
                raise TopologyError(
                    f"boundary {b}->{b + 1} has no wireable elements")
            used = np.zeros(len(outputs), dtype=bool)
            k = min(fans[b], len(outputs))
            # draws stay independent per input element on purpose: the
            # resulting per-source multiplicity asymmetry is what the
            # per-neuron gain updates latch onto downstream
            for d, ie in inputs:
                for j in rng.choice(len(outputs), size=k, replace=False):
                    used[j] = True
                    s, oe = outputs[j]
                    edge_rows.append((s, oe, d, ie))
            # stranded outputs get one edge each so the reversed graph
            # leaves no input element undriven
            for j in np.flatnonzero(~used):
                s, oe = outputs[j]
                d, ie = inputs[int(rng.integers(len(inputs)))]
                edge_rows.append((s, oe, d, ie))
        elif wiring == "contrast":
            outputs = [(int(s), int(primary_out[s])) for s in src]
            all_src = np.arange(len(outputs))
            used = np.zeros(len(outputs), dtype=bool)
            k_neg = INHIBIT_FAN_RATIO * fans[b]
            class_boundary = b == n_layers - 2
            if class_boundary:
                # each class owns a private slice of the penultimate layer:
                # its anchor hears only that slice, its opposing port hears
                # the other classes' slices, so no two class scores are
                # positive mixtures of the same sources
                blocks = np.array_split(all_src, len(dst))
                if any(len(blk) == 0 for blk in blocks):
                    raise TopologyError(
                        "contrast wiring needs at least one source neuron "
                        "per class at the last boundary")
            else:
                # interior boundaries: a deterministic stripe gives every
                # source a guaranteed excitatory edge, random extras add
                # diversity; pure random draws leave coverage holes that
                # make class separability swing wildly across seeds
                stripes = np.array_split(all_src, len(dst))
            for c, d in enumerate(dst):
                exc = int(primary_in[d])
                inh = (exc + 3) % N_ELEMENTS
                if class_boundary:
                    pool = blocks[c]
                    pos = rng.choice(pool, size=min(fans[b], len(pool)),
                                     replace=False)
                else:
                    stripe = stripes[c]
                    if len(stripe) >= fans[b]:
                        pos = rng.choice(stripe, size=fans[b], replace=False)
                    else:
                        others = np.setdiff1d(all_src, stripe)
                        k_extra = min(fans[b] - len(stripe), len(others))
                        pos = np.concatenate([
                            stripe, rng.choice(others, size=k_extra,
                                               replace=False)])
                rest_pool = np.setdiff1d(all_src, blocks[c] if class_boundary
                                         else pos)
                for j in pos:
                    used[j] = True
                    s, oe = outputs[int(j)]
                    edge_rows.append((s, oe, d, exc))
                if len(rest_pool):
                    neg = rng.choice(rest_pool,
                                     size=min(k_neg, len(rest_pool)),
                                     replace=False)
                    for j in neg:
                        used[j] = True
                        s, oe = outputs[int(j)]
                        edge_rows.append((s, oe, d, inh))
            # stranded sources keep the reversed graph drivable; at the
            # class boundary they join their own class's anchor so slices
            # stay private
            for j in np.flatnonzero(~used):
                s, oe = outputs[int(j)]
                if class_boundary:
                    c = next(ci for ci, blk in enumerate(blocks)
                             if j in blk)
                    d = int(dst[c])
                else:
                    d = int(dst[int(rng.integers(len(dst)))])
                edge_rows.append((s, oe, d, int(primary_in[d])))
        else:
            outputs = [(s, oe) for s in src for oe in out_elems[s]]
            inputs = [(d, ie) for d in dst for ie in in_elems[d]]
            if not outputs or not inputs:
                raise TopologyError(f"boundary {b}->{b + 1} has no wireable elements")
            covered = np.zeros(len(inputs), dtype=bool)
            for s, oe in outputs:
                j = int(rng.integers(len(inputs)))
                covered[j] = True
                d, ie = inputs[j]
                edge_rows.append((s, oe, d, ie))
            for j in np.flatnonzero(~covered):
                d, ie = inputs[j]
                s, oe = outputs[int(rng.integers(len(outputs)))]
                edge_rows.append((s, oe, d, ie))
    edges = np.unique(np.array(edge_rows, dtype=np.int32).reshape(-1, 4), axis=0)

    external_inputs = {f: (int(starts[0] + f), int(primary_in[starts[0] + f]))
                       for f in range(layer_sizes[0])}
    last = np.arange(starts[-2], starts[-1])
    external_outputs = {c: (int(nn), int(primary_out[nn]))
                        for c, nn in enumerate(last)}

    k1v, k2v, k3v = (float(v) for v in init_params)
    shape = (n, N_ELEMENTS)
    return NetworkGraph(layer_sizes=layer_sizes, roles=roles, edges=edges,
                        k1=np.full(shape, k1v), k2=np.full(shape, k2v),
                        k3=np.full(shape, k3v),
                        external_inputs=external_inputs,
                        external_outputs=external_outputs,
                        seed=int(seed), wiring=wiring, direction="forward",
                        fan_in=fans)


def reverse(g: NetworkGraph) -> NetworkGraph:
    """Flip the graph for backward propagation (an involution).

    Every edge reverses, input roles become output roles and vice versa,
    and the external output ports become the injection points.
    """
    roles = np.where(g.roles == ROLE_INPUT, ROLE_OUTPUT,
                     np.where(g.roles == ROLE_OUTPUT, ROLE_INPUT, ROLE_UNUSED)
                     ).astype(np.int8)
    edges = np.unique(np.ascontiguousarray(g.edges[:, [2, 3, 0, 1]]), axis=0)
    direction = "reversed" if g.direction == "forward" else "forward"
    return NetworkGraph(layer_sizes=g.layer_sizes, roles=roles, edges=edges,
                        k1=g.k1, k2=g.k2, k3=g.k3,
                        external_inputs=g.external_inputs,
                        external_outputs=g.external_outputs,
                        seed=g.seed, wiring=g.wiring, direction=direction,
                        fan_in=g.fan_in)


def replace_params(g: NetworkGraph, k1, k2, k3) -> NetworkGraph:
    """Same topology, new parameter stacks."""
    return NetworkGraph(layer_sizes=g.layer_sizes, roles=g.roles, edges=g.edges,
                        k1=np.array(k1, dtype=float), k2=np.array(k2, dtype=float),
                        k3=np.array(k3, dtype=float),
                        external_inputs=g.external_inputs,
                        external_outputs=g.external_outputs,
                        seed=g.seed, wiring=g.wiring, direction=g.direction,
                        fan_in=g.fan_in)


def validate(g: NetworkGraph) -> list:
    """Check every graph invariant; returns a list of Violations (empty = ok).

    Direction-aware: in a reversed graph edges must run from layer L+1 to
    layer L and the injection ports are the external outputs.
    """
    out = []
    n = g.n_neurons

    for i in range(n):
        has_in = np.any(g.roles[i] == ROLE_INPUT)
        has_out = np.any(g.roles[i] == ROLE_OUTPUT)
        if not has_in:
            out.append(Violation("no-input-role", f"neuron {i} has no input-role element", i))
        if not has_out:
            out.append(Violation("no-output-role", f"neuron {i} has no output-role element", i))

    bad_vals = np.argwhere((g.roles < 0) | (g.roles > 2))
    for i, e in bad_vals:
        out.append(Violation("bad-role-value", f"neuron {i} element {e} has invalid role",
                             int(i), int(e)))

    if g.edges.size:
        e = g.edges
        in_range = ((e[:, 0] >= 0) & (e[:, 0] < n) & (e[:, 2] >= 0) & (e[:, 2] < n)
                    & (e[:, 1] >= 0) & (e[:, 1] < N_ELEMENTS)
                    & (e[:, 3] >= 0) & (e[:, 3] < N_ELEMENTS))
        for row in e[~in_range]:
            out.append(Violation("edge-out-of-range", f"edge {tuple(row)} out of range"))
        e = e[in_range]
        src_role = g.roles[e[:, 0], e[:, 1]]
        dst_role = g.roles[e[:, 2], e[:, 3]]
        for row in e[src_role != ROLE_OUTPUT]:
            out.append(Violation("src-not-output",
                                 f"edge {tuple(row)} leaves a non-output element",
                                 int(row[0]), int(row[1])))
        for row in e[dst_role != ROLE_INPUT]:
            out.append(Violation("dst-not-input",
                                 f"edge {tuple(row)} enters a non-input element",
                                 int(row[2]), int(row[3])))
        step = 1 if g.direction == "forward" else -1
        bad_layer = g.layer_of[e[:, 2]] != g.layer_of[e[:, 0]] + step
        for row in e[bad_layer]:
            out.append(Violation("edge-not-adjacent",
                                 f"edge {tuple(row)} does not cross one boundary downstream",
                                 int(row[0]), int(row[1])))
        dup = len(g.edges) != len(np.unique(g.edges, axis=0))
        if dup:
            out.append(Violation("duplicate-edges", "edge list contains duplicates"))

    # port placement: features enter the first layer, classes sit on the last
    first, last_layer = 0, g.n_layers - 1
    inject_role = ROLE_INPUT if g.direction == "forward" else ROLE_OUTPUT
    read_role = ROLE_OUTPUT if g.direction == "forward" else ROLE_INPUT
    for f, (nn, el) in g.external_inputs.items():
        if g.layer_of[nn] != first:
            out.append(Violation("input-port-misplaced",
                                 f"feature {f} port on neuron {nn} outside first layer",
                                 nn, el))
        elif g.roles[nn, el] != inject_role:
            out.append(Violation("input-port-role",
                                 f"feature {f} port at neuron {nn} element {el} has wrong role",
                                 nn, el))
    for c, (nn, el) in g.external_outputs.items():
        if g.layer_of[nn] != last_layer:
            out.append(Violation("output-port-misplaced",
                                 f"class {c} port on neuron {nn} outside last layer",
                                 nn, el))
        elif g.roles[nn, el] != read_role:
            out.append(Violation("output-port-role",
                                 f"class {c} port at neuron {nn} element {el} has wrong role",
                                 nn, el))

    # every receiving element must be driven by an edge or an external port
    recv_role = ROLE_INPUT
    driven = set()
    if g.edges.size:
        for nn, el in zip(g.edges[:, 2], g.edges[:, 3]):
            driven.add((int(nn), int(el)))
    ports = g.external_inputs if g.direction == "forward" else g.external_outputs
    for _, (nn, el) in ports.items():
        driven.add((int(nn), int(el)))
    for i in range(n):
        for el in np.flatnonzero(g.roles[i] == recv_role):
            if (i, int(el)) not in driven:
                out.append(Violation("undriven-input",
                                     f"neuron {i} element {int(el)} receives nothing",
                                     i, int(el)))

    for name, arr in (("k1", g.k1), ("k2", g.k2), ("k3", g.k3)):
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            out.append(Violation("bad-params", f"{name} has non-finite or non-positive entries"))

    return out


def to_json(g: NetworkGraph) -> str:
    """Serialize to the versioned plain-text snapshot format (JSON, v1)."""
    doc = {
        "version": SERIAL_VERSION,
        "layer_sizes": list(g.layer_sizes),
        "seed": g.seed,
        "wiring": g.wiring,
        "fan_in": list(g.fan_in),
        "direction": g.direction,
        "roles": g.roles.tolist(),
        "edges": g.edges.tolist(),
        "k1": g.k1.tolist(),
        "k2": g.k2.tolist(),
        "k3": g.k3.tolist(),
        "external_inputs": {str(k): list(v) for k, v in g.external_inputs.items()},
        "external_outputs": {str(k): list(v) for k, v in g.external_outputs.items()},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def from_json(text: str) -> NetworkGraph:
    doc = json.loads(text)
    version = doc.get("version")
    if version != SERIAL_VERSION:
        raise ValueError(f"unsupported graph format version {version!r}")
    return NetworkGraph(
        layer_sizes=tuple(doc["layer_sizes"]),
        roles=np.array(doc["roles"], dtype=np.int8),
        edges=np.array(doc["edges"], dtype=np.int32).reshape(-1, 4),
        k1=np.array(doc["k1"], dtype=float),
        k2=np.array(doc["k2"], dtype=float),
        k3=np.array(doc["k3"], dtype=float),
        external_inputs={int(k): tuple(v) for k, v in doc["external_inputs"].items()},
        external_outputs={int(k): tuple(v) for k, v in doc["external_outputs"].items()},
        seed=int(doc["seed"]),
        wiring=doc["wiring"],
        fan_in=tuple(doc.get("fan_in", ())),
        direction=doc["direction"],
    )
