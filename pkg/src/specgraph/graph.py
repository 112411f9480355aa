"""Skeleton tracing into an attributed spatial multigraph.

Skeleton pixels are classified by their 8-neighbor count: junctions (>= 3),
leaves (1), path pixels (2) and isolated dots (0).  Adjacent junction pixels
collapse into one node at their centroid; every maximal path-pixel run
between nodes becomes one edge carrying its ordered pixel trajectory, and a
junctionless cycle becomes a self-loop anchored at its lexicographically
smallest pixel.  Post-processing merges nearby nodes (single linkage),
contracts short edges and finally removes isolated nodes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .errors import EmptySpectrumError, StageError
from .field import EnergyWindow, RefinementPlan, ScalarField, adaptive_dos, estimate_window
from .morphology import BinaryImage, skeletonize
from .poly import LaurentCharPoly

_EIGHT = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
_STRUCT8 = np.ones((3, 3), dtype=bool)


class PixelRole(enum.IntEnum):
    ISOLATED = 0
    LEAF = 1
    PATH = 2
    JUNCTION = 3


def classify_pixels(skel: BinaryImage) -> np.ndarray:
    """Role grid: background pixels are -1, set pixels carry a PixelRole."""
    b = skel.bits
    padded = np.pad(b, 1, mode="constant")
    count = np.zeros(b.shape, dtype=np.int8)
    for dr, dc in _EIGHT:
        count += padded[1 + dr : 1 + dr + b.shape[0], 1 + dc : 1 + dc + b.shape[1]]
    roles = np.full(b.shape, -1, dtype=np.int8)
    roles[b & (count == 0)] = PixelRole.ISOLATED
    roles[b & (count == 1)] = PixelRole.LEAF
    roles[b & (count == 2)] = PixelRole.PATH
    roles[b & (count >= 3)] = PixelRole.JUNCTION
    return roles


# ---------------------------------------------------------------------------
# pixel-space graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PixelNode:
    id: int
    kind: str  # junction | leaf | isolated | cycle
    pixels: tuple[tuple[int, int], ...]
    pos: tuple[float, float]  # (row, col), cluster centroid


@dataclass(frozen=True)
class PixelEdge:
    u: int
    v: int
    chain: tuple[tuple[int, int], ...]  # attach pixel, interior..., attach pixel
    closed: bool = False  # junctionless cycle: trajectory closes on itself


@dataclass(frozen=True)
class PixelGraph:
    nodes: tuple[PixelNode, ...]
    edges: tuple[PixelEdge, ...]
    shape: tuple[int, int]


def trace_edges(skel: BinaryImage, roles: np.ndarray) -> PixelGraph:
    """Deterministic conversion of a classified skeleton into a multigraph."""
    b = skel.bits
    junction = roles == PixelRole.JUNCTION
    nodes: list[PixelNode] = []
    pixel2node: dict[tuple[int, int], int] = {}

    lbl, nlab = ndimage.label(junction, structure=_STRUCT8)
    grouped: dict[int, list[tuple[int, int]]] = {}
    for r, c in np.argwhere(junction):
        grouped.setdefault(int(lbl[r, c]), []).append((int(r), int(c)))
    comps = sorted(tuple(sorted(v)) for v in grouped.values())
    for pixels in comps:
        arr = np.array(pixels, dtype=float)
        node = PixelNode(
            id=len(nodes),
            kind="junction",
            pixels=pixels,
            pos=(float(arr[:, 0].mean()), float(arr[:, 1].mean())),
        )
        nodes.append(node)
        for px in pixels:
            pixel2node[px] = node.id

    for role, kind in ((PixelRole.LEAF, "leaf"), (PixelRole.ISOLATED, "isolated")):
        for r, c in np.argwhere(roles == role):
            px = (int(r), int(c))
            node = PixelNode(id=len(nodes), kind=kind, pixels=(px,), pos=(float(r), float(c)))
            nodes.append(node)
            pixel2node[px] = node.id

    def set_neighbors(px: tuple[int, int]) -> list[tuple[int, int]]:
        r, c = px
        out = []
        for dr, dc in _EIGHT:
            rr, cc = r + dr, c + dc
            if 0 <= rr < b.shape[0] and 0 <= cc < b.shape[1] and b[rr, cc]:
                out.append((rr, cc))
        return out

    is_path = roles == PixelRole.PATH
    visited = np.zeros(b.shape, dtype=bool)
    edges: list[PixelEdge] = []

    # node pixels directly adjacent to node pixels (no interior run)
    seen_pairs: set[tuple[tuple[int, int], tuple[int, int]]] = set()
    for node in nodes:
        if node.kind != "leaf":
            continue
        px = node.pixels[0]
        for nb in set_neighbors(px):
            if nb in pixel2node:
                pair = tuple(sorted((px, nb)))
                if pair in seen_pairs:
                    continue
                seen_pairs.add(pair)
                edges.append(PixelEdge(u=node.id, v=pixel2node[nb], chain=(px, nb)))

    def walk(start: tuple[int, int], prev: tuple[int, int]) -> tuple[list[tuple[int, int]], tuple[int, int]]:
        chain = [start]
        visited[start] = True
        cur = start
        while True:
            nxt = [n for n in set_neighbors(cur) if n != prev]
            # path pixels have exactly two set neighbors, so nxt is unique
            nb = nxt[0]
            if nb in pixel2node:
                return chain, nb
            prev, cur = cur, nb
            chain.append(cur)
            visited[cur] = True

    for node in nodes:
        for member in node.pixels:
            for nb in sorted(set_neighbors(member)):
                if is_path[nb] and not visited[nb]:
                    chain, end_px = walk(nb, member)
                    edges.append(
                        PixelEdge(
                            u=node.id,
                            v=pixel2node[end_px],
                            chain=(member, *chain, end_px),
                        )
                    )

    # leftover path pixels belong to junctionless cycles
    remaining = is_path & ~visited
    if remaining.any():
        lbl_c, nlab_c = ndimage.label(remaining, structure=_STRUCT8)
        anchors = []
        for k in range(1, nlab_c + 1):
            pix = sorted(map(tuple, np.argwhere(lbl_c == k)))
            anchors.append((pix[0], k))
        for anchor, _k in sorted(anchors):
            anchor = (int(anchor[0]), int(anchor[1]))
            node = PixelNode(
                id=len(nodes), kind="cycle", pixels=(anchor,), pos=(float(anchor[0]), float(anchor[1]))
            )
            nodes.append(node)
            pixel2node[anchor] = node.id
            visited[anchor] = True
            nbrs = sorted(set_neighbors(anchor))
            chain = [anchor]
            prev, cur = anchor, nbrs[0]
            while cur != anchor:
                chain.append(cur)
                visited[cur] = True
                step = [n for n in set_neighbors(cur) if n != prev]
                prev, cur = cur, step[0]
            edges.append(PixelEdge(u=node.id, v=node.id, chain=tuple(chain), closed=True))

    return PixelGraph(nodes=tuple(nodes), edges=tuple(edges), shape=b.shape)


# ---------------------------------------------------------------------------
# energy-space multigraph
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GraphNode:
    id: int
    pos: tuple[float, float]  # (Re E, Im E)
    dos: float
    potential: float


@dataclass(frozen=True)
class GraphEdge:
    u: int
    v: int
    weight: float
    pts: np.ndarray  # (n, 2) of (Re E, Im E)
    avg_dos: float
    avg_potential: float

    def __post_init__(self):
        self.pts.setflags(write=False)


@dataclass(frozen=True)
class SpectralMultigraph:
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]
    window: EnergyWindow

    @property
    def pixel_pitch(self) -> float:
        return self.window.pitch

    def degrees(self) -> dict[int, int]:
        deg = {n.id: 0 for n in self.nodes}
        for e in self.edges:
            deg[e.u] += 1
            deg[e.v] += 1
        return deg

    def component_count(self) -> int:
        parent = {n.id: n.id for n in self.nodes}

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in self.edges:
            parent[find(e.u)] = find(e.v)
        return len({find(n.id) for n in self.nodes})


def _polyline_length(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    d = np.diff(pts, axis=0)
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def _px_to_energy(window: EnergyWindow, rc: np.ndarray) -> np.ndarray:
    h = window.pitch
    re = window.re_min + h * (rc[:, 1] + 0.5)
    im = window.im_min + h * (rc[:, 0] + 0.5)
    return np.column_stack([re, im])


def to_energy_coords(
    g: PixelGraph, phi: ScalarField, dos: ScalarField
) -> SpectralMultigraph:
    """Map pixel indices to pixel-center energies and sample attributes."""
    window = phi.window
    r = window.resolution
    if g.shape != (r, r) or dos.window != window:
        raise ValueError("pixel graph and fields must share one grid")

    def sample(pos_rc: tuple[float, float]) -> tuple[float, float]:
        ri = min(max(int(round(pos_rc[0])), 0), r - 1)
        ci = min(max(int(round(pos_rc[1])), 0), r - 1)
        return float(dos.values[ri, ci]), float(phi.values[ri, ci])

    nodes = []
    for n in g.nodes:
        d, pot = sample(n.pos)
        pos = _px_to_energy(window, np.array([n.pos]))[0]
        nodes.append(GraphNode(id=n.id, pos=(float(pos[0]), float(pos[1])), dos=d, potential=pot))

    edges = []
    for e in g.edges:
        rc = [g.nodes[e.u].pos, *e.chain, *( (e.chain[0],) if e.closed else (g.nodes[e.v].pos,) )]
        rc_arr = np.array(rc, dtype=float)
        keep = np.ones(len(rc_arr), dtype=bool)
        keep[1:] = np.any(rc_arr[1:] != rc_arr[:-1], axis=1)
        rc_arr = rc_arr[keep]
        pts = _px_to_energy(window, rc_arr)
        vals_d, vals_p = zip(*(sample((p[0], p[1])) for p in rc_arr))
        edges.append(
            GraphEdge(
                u=e.u,
                v=e.v,
                weight=_polyline_length(pts),
                pts=pts,
                avg_dos=float(np.mean(vals_d)),
                avg_potential=float(np.mean(vals_p)),
            )
        )
    return SpectralMultigraph(nodes=tuple(nodes), edges=tuple(edges), window=window)


# ---------------------------------------------------------------------------
# post-processing
# ---------------------------------------------------------------------------

def _merge_groups(
    g: SpectralMultigraph, groups: list[list[int]]
) -> SpectralMultigraph:
    """Collapse each node group to its centroid and rewire the edges."""
    id_map: dict[int, int] = {}
    nodes: list[GraphNode] = []
    by_id = {n.id: n for n in g.nodes}
    for group in sorted(groups, key=min):
        members = [by_id[i] for i in group]
        new_id = len(nodes)
        pos = (
            float(np.mean([m.pos[0] for m in members])),
            float(np.mean([m.pos[1] for m in members])),
        )
        nodes.append(
            GraphNode(
                id=new_id,
                pos=pos,
                dos=float(np.mean([m.dos for m in members])),
                potential=float(np.mean([m.potential for m in members])),
            )
        )
        for i in group:
            id_map[i] = new_id

    edges: list[GraphEdge] = []
    for e in g.edges:
        u, v = id_map[e.u], id_map[e.v]
        pts = e.pts
        if nodes[u].pos != tuple(pts[0]):
            pts = np.vstack([np.array(nodes[u].pos)[None, :], pts])
        if nodes[v].pos != tuple(pts[-1]):
            pts = np.vstack([pts, np.array(nodes[v].pos)[None, :]])
        edges.append(
            GraphEdge(
                u=u,
                v=v,
                weight=_polyline_length(pts),
                pts=pts,
                avg_dos=e.avg_dos,
                avg_potential=e.avg_potential,
            )
        )
    return SpectralMultigraph(nodes=tuple(nodes), edges=tuple(edges), window=g.window)


def merge_nearby_nodes(
    g: SpectralMultigraph,
    tol: float,
    short_edge_threshold: float = 0.0,
) -> SpectralMultigraph:
    """Single-linkage node merging plus short-edge contraction (pixel units).

    With both thresholds at zero the graph is returned unchanged; otherwise
    isolated nodes are removed at the very end.
    """
    if tol < 0 or short_edge_threshold < 0:
        raise ValueError("tolerances must be non-negative")
    if tol == 0 and short_edge_threshold == 0:
        return g
    h = g.window.pitch
    tol_e = tol * h
    short_e = short_edge_threshold * h

    if g.nodes:
        ids = [n.id for n in g.nodes]
        parent = {i: i for i in ids}

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        if tol_e > 0:
            pos = np.array([n.pos for n in g.nodes])
            for a in range(len(ids)):
                d = np.hypot(pos[a + 1 :, 0] - pos[a, 0], pos[a + 1 :, 1] - pos[a, 1])
                for off in np.nonzero(d <= tol_e)[0]:
                    parent[find(ids[a])] = find(ids[a + 1 + off])
        groups: dict[int, list[int]] = {}
        for i in ids:
            groups.setdefault(find(i), []).append(i)
        g = _merge_groups(g, list(groups.values()))

    # contract short non-loop edges until stable
    if short_e > 0:
        while True:
            target = next(
                (
                    k
                    for k, e in enumerate(g.edges)
                    if e.u != e.v and e.weight < short_e
                ),
                None,
            )
            if target is None:
                break
            e = g.edges[target]
            groups = [[n.id] for n in g.nodes if n.id not in (e.u, e.v)]
            groups.append(sorted({e.u, e.v}))
            g = SpectralMultigraph(
                nodes=g.nodes,
                edges=tuple(x for k, x in enumerate(g.edges) if k != target),
                window=g.window,
            )
            g = _merge_groups(g, groups)
        # contraction artifacts: drop self-loops below the same threshold
        g = SpectralMultigraph(
            nodes=g.nodes,
            edges=tuple(e for e in g.edges if not (e.u == e.v and e.weight < short_e)),
            window=g.window,
        )

    used = {e.u for e in g.edges} | {e.v for e in g.edges}
    keep = [n for n in g.nodes if n.id in used]
    id_map = {n.id: k for k, n in enumerate(keep)}
    return SpectralMultigraph(
        nodes=tuple(replace(n, id=id_map[n.id]) for n in keep),
        edges=tuple(replace(e, u=id_map[e.u], v=id_map[e.v]) for e in g.edges),
        window=g.window,
    )


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtractionConfig:
    window: EnergyWindow | None = None
    cells: int = 40
    pad_fraction: float = 0.20
    base_resolution: int = 256
    subdivision: int = 4
    merge_tol_px: float = 5.0
    short_edge_px: float | None = None  # resolved per band count when unset
    workers: int = 1
    max_dim: int = 500

    def resolved_short_edge(self, bands: int) -> float:
        if self.short_edge_px is not None:
            return self.short_edge_px
        return 0.0 if bands == 1 else 20.0


@dataclass(frozen=True)
class ExtractionResult:
    graph: SpectralMultigraph
    phi: ScalarField
    dos: ScalarField
    binary: ScalarField
    skeleton: BinaryImage
    plan: RefinementPlan | None
    window: EnergyWindow
    config: ExtractionConfig
    degenerate: bool = False

    @property
    def refined_fraction(self) -> float:
        return self.plan.refined_fraction if self.plan is not None else 0.0


def extract_pipeline(poly: LaurentCharPoly, config: ExtractionConfig | None = None) -> ExtractionResult:
    """estimate window -> adaptive fields -> skeleton -> graph -> cleanup."""
    cfg = config or ExtractionConfig()

    def stage(name: str, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except EmptySpectrumError:
            raise
        except Exception as e:  # noqa: BLE001 - stage context is the contract
            raise StageError(name, e) from e

    window = cfg.window or stage(
        "window", estimate_window, poly, cfg.cells, cfg.pad_fraction,
        cfg.base_resolution, cfg.max_dim,
    )
    try:
        phi, dos, binary, plan = stage(
            "field", adaptive_dos, poly, window, cfg.base_resolution,
            cfg.subdivision, cfg.workers,
        )
    except EmptySpectrumError as e:
        empty = SpectralMultigraph(nodes=(), edges=(), window=window.with_resolution(
            cfg.base_resolution * cfg.subdivision))
        coarse = e.phi
        return ExtractionResult(
            graph=empty, phi=coarse, dos=e.dos, binary=ScalarField(
                window=coarse.window, values=np.zeros_like(coarse.values), kind="binary"),
            skeleton=BinaryImage(window=coarse.window, bits=np.zeros_like(coarse.values, dtype=bool)),
            plan=None, window=window, config=cfg, degenerate=True,
        )
    skel = stage("skeleton", skeletonize, BinaryImage.from_field(binary))
    mask_fine = np.kron(plan.mask, np.ones((plan.subdivision, plan.subdivision), dtype=bool))
    if np.any(skel.bits & ~mask_fine):
        raise StageError("skeleton", AssertionError("skeleton escaped the refinement mask"))
    roles = stage("trace", classify_pixels, skel)
    pg = stage("trace", trace_edges, skel, roles)
    g = stage("coords", to_energy_coords, pg, phi, dos)
    g = stage(
        "merge", merge_nearby_nodes, g, cfg.merge_tol_px,
        cfg.resolved_short_edge(poly.bands),
    )
    return ExtractionResult(
        graph=g, phi=phi, dos=dos, binary=binary, skeleton=skel,
        plan=plan, window=window, config=cfg,
    )


def spectral_graph(poly: LaurentCharPoly, config: ExtractionConfig | None = None) -> SpectralMultigraph:
    """Full polynomial-to-multigraph pipeline; deterministic for fixed config."""
    return extract_pipeline(poly, config).graph
