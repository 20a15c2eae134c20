"""Reverse-mode gradient tape.

Forward ops append TapeNodes (parents + a pullback closure) to a per-thread
tape; backward walks node ids in decreasing order, feeding each node's
accumulated cotangent through its pullback and adding the results into the
parents' slots. Node ids are append positions, so decreasing id order is a
valid topological order by construction.
"""

from __future__ import annotations

import threading

from .errors import GradError, ShapeError


class TapeNode:
    __slots__ = ("id", "epoch", "parents", "pullback", "saved")

    def __init__(self, nid, epoch, parents=(), pullback=None, saved=()):
        self.id = nid
        self.epoch = epoch
        self.parents = parents
        self.pullback = pullback
        # (buffer, version) pairs pinning forward values the pullback reads
        self.saved = saved


class Tape:
    __slots__ = ("nodes", "recording", "epoch", "pullback_calls")

    def __init__(self):
        self.nodes: list[TapeNode] = []
        self.recording = True
        self.epoch = 0
        self.pullback_calls = 0

    def reset(self):
        """Drop all recorded nodes; prior node references become stale."""
        self.nodes.clear()
        self.epoch += 1
        self.pullback_calls = 0

    def __len__(self):
        return len(self.nodes)


_LOCAL = threading.local()


def tape() -> Tape:
    tp = getattr(_LOCAL, "tape", None)
    if tp is None:
        tp = Tape()
        _LOCAL.tape = tp
    return tp


def reset_tape():
    tape().reset()


def is_recording() -> bool:
    return tape().recording


class no_grad:
    """Disable recording for the dynamic extent; restores the prior state."""

    def __enter__(self):
        tp = tape()
        self._prev = tp.recording
        tp.recording = False
        return self

    def __exit__(self, *exc):
        tape().recording = self._prev
        return False


def _valid_node(t, tp):
    node = t.node
    if node is not None and node.epoch == tp.epoch:
        return node
    return None


def _ensure_leaf(t, tp):
    node = _valid_node(t, tp)
    if node is None:
        node = TapeNode(len(tp.nodes), tp.epoch)
        tp.nodes.append(node)
        t.node = node
    return node


def record(op_kind, inputs, output, pullbacks, saved=()):
    """Attach a tape node to `output` if recording is on and a grad path exists.

    `pullbacks` aligns with `inputs`: one callable (cotangent -> cotangent)
    per input, entries for non-grad inputs are ignored. `saved` lists tensors
    whose forward values the pullbacks read; their buffer versions are pinned
    and re-checked at backward time.
    """
    tp = tape()
    if not tp.recording:
        return output
    live = [(t, pb) for t, pb in zip(inputs, pullbacks) if t.requires_grad]
    if not live:
        return output
    parent_ids = []
    pbs = []
    for t, pb in live:
        parent_ids.append(_ensure_leaf(t, tp).id)
        pbs.append(pb)

    def pull(g, _pbs=tuple(pbs)):
        return tuple(pb(g) for pb in _pbs)

    node = TapeNode(
        len(tp.nodes),
        tp.epoch,
        parents=tuple(parent_ids),
        pullback=pull,
        saved=tuple((t.buffer, t.buffer.version) for t in saved),
    )
    tp.nodes.append(node)
    output.requires_grad = True
    output.node = node
    return output


class GradStore:
    """Accumulated cotangents keyed by tape node id; lookup by tensor."""

    def __init__(self, epoch=None):
        self._by_id: dict[int, object] = {}
        self._epoch = epoch

    def _accumulate(self, nid, g):
        from .core import add

        cur = self._by_id.get(nid)
        # lazy: first contribution is stored as-is, later ones allocate a sum
        self._by_id[nid] = g if cur is None else add(cur, g)

    def get(self, t):
        node = t.node
        if node is None or (self._epoch is not None and node.epoch != self._epoch):
            return None
        return self._by_id.get(node.id)

    def __contains__(self, t):
        return self.get(t) is not None

    def __getitem__(self, t):
        g = self.get(t)
        if g is None:
            raise KeyError("no gradient recorded for this tensor")
        return g

    def by_id(self, nid):
        return self._by_id.get(nid)

    def __len__(self):
        return len(self._by_id)

    def clear(self):
        self._by_id.clear()


def zero_grad(store: GradStore) -> GradStore:
    """Empty the store, releasing its gradient buffers. Idempotent."""
    store.clear()
    return store


def backward(loss, seed=None) -> GradStore:
    """Propagate cotangents from `loss` to everything it depends on.

    The default seed is the scalar 1; a non-scalar loss requires an explicit
    seed of the same shape. Runs with recording disabled, so pullbacks can
    use the public ops freely.
    """
    from .core import ones

    tp = tape()
    node = _valid_node(loss, tp)
    if node is None:
        raise GradError(
            "loss has no recorded graph (not produced under recording, or the tape was reset)"
        )
    if seed is None:
        if loss.size != 1:
            raise GradError("non-scalar loss requires an explicit seed tensor")
        seed = ones(loss.shape)
    elif seed.shape != loss.shape:
        raise ShapeError(
            f"seed shape {seed.shape} does not match loss shape {loss.shape}"
        )

    store = GradStore(epoch=tp.epoch)
    store._by_id[node.id] = seed
    nodes = tp.nodes
    with no_grad():
        for nid in range(node.id, -1, -1):
            g = store._by_id.get(nid)
            if g is None:
                continue
            nd = nodes[nid]
            if nd.pullback is None:
                continue  # leaf
            for buf, ver in nd.saved:
                if buf.version != ver:
                    raise GradError(
                        "a tensor saved for backward was mutated in place after recording"
                    )
            tp.pullback_calls += 1
            for pid, pg in zip(nd.parents, nd.pullback(g)):
                store._accumulate(pid, pg)
    return store
