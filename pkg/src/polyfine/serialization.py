"""JSON/JSON-lines formats for MDPs, policies and datasets, and the results CSV."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import EpisodeDataset
from .errors import ParseError
from .mdp import Policy, TabularMDP, validate_mdp

CSV_HEADER = ["algo", "n", "seed", "suboptimality", "cstar", "pessimism_held", "runtime_ms"]


def mdp_to_dict(mdp: TabularMDP, reference_policy: Policy | None = None) -> dict:
    doc = {
        "S": mdp.S,
        "A": mdp.A,
        "H": mdp.H,
        "initial": mdp.initial_dist.tolist(),
        "transitions": mdp.transitions.tolist(),
        "rewards": mdp.rewards.tolist(),
    }
    if reference_policy is not None:
        doc["reference_policy"] = reference_policy.probs.tolist()
    return doc


def serialize_mdp(mdp: TabularMDP, reference_policy: Policy | None = None) -> str:
    return json.dumps(mdp_to_dict(mdp, reference_policy))


def _field(doc: dict, key: str):
    if key not in doc:
        raise ParseError(f"missing field {key!r}")
    return doc[key]


def _array(doc: dict, key: str, shape: tuple) -> np.ndarray:
    try:
        arr = np.asarray(_field(doc, key), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field {key!r} is not a numeric array: {exc}") from None
    if arr.shape != shape:
        raise ParseError(f"field {key!r} has shape {arr.shape}, expected {shape}")
    return arr


def mdp_from_dict(doc: dict) -> tuple[TabularMDP, Policy | None]:
    if not isinstance(doc, dict):
        raise ParseError("MDP document must be a JSON object")
    try:
        S, A, H = (int(_field(doc, k)) for k in ("S", "A", "H"))
    except (TypeError, ValueError):
        raise ParseError("fields 'S', 'A', 'H' must be integers") from None
    mdp = TabularMDP(
        _array(doc, "transitions", (H, S, A, S)),
        _array(doc, "rewards", (H, S, A)),
        _array(doc, "initial", (S,)),
    )
    validate_mdp(mdp)
    mu = Policy(_array(doc, "reference_policy", (H, S, A))) if "reference_policy" in doc else None
    return mdp, mu


def parse_mdp(text: str) -> TabularMDP:
    return parse_mdp_with_reference(text)[0]


def parse_mdp_with_reference(text: str) -> tuple[TabularMDP, Policy | None]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return mdp_from_dict(doc)


def serialize_policy(policy: Policy) -> str:
    return json.dumps({"probs": policy.probs.tolist()})


def parse_policy(text: str, dims: tuple[int, int, int] | None = None) -> Policy:
    """Accepts ``{"probs": [h][s][a]}`` or a deterministic ``{"actions": [h][s]}``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("policy document must be a JSON object")
    if "probs" in doc:
        probs = np.asarray(doc["probs"], dtype=float)
    elif "actions" in doc:
        if dims is None:
            raise ParseError("an 'actions' policy needs the MDP dimensions")
        acts = np.asarray(doc["actions"], dtype=int)
        if acts.min(initial=0) < 0 or acts.max(initial=0) >= dims[1]:
            raise ParseError("field 'actions' has out-of-range entries")
        probs = np.eye(dims[1])[acts]
    else:
        raise ParseError("policy needs a 'probs' or 'actions' field")
    if dims is not None and probs.shape != (dims[2], dims[0], dims[1]):
        raise ParseError(f"policy shape {probs.shape} does not match MDP (H,S,A)={(dims[2], dims[0], dims[1])}")
    if probs.ndim != 3 or np.any(probs < 0) or np.any(np.abs(probs.sum(-1) - 1) > 1e-9):
        raise ParseError("policy rows must be probability vectors over actions")
    return Policy(probs)


def serialize_dataset(data: EpisodeDataset) -> str:
    out = io.StringIO()
    out.write(json.dumps({"H": data.H, "behavior": data.behavior_tag, "seed": int(data.seed)}) + "\n")
    for s, a, r in zip(data.states, data.actions, data.rewards):
        out.write(json.dumps({"states": s.tolist(), "actions": a.tolist(), "rewards": r.tolist()}) + "\n")
    return out.getvalue()


def parse_dataset(text: str) -> EpisodeDataset:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("line 1: missing dataset header")
    try:
        header = json.loads(lines[0])
        H = int(header["H"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"line 1: bad dataset header ({exc})") from None
    states, actions, rewards = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            ep = json.loads(line)
            s, a, r = ep["states"], ep["actions"], ep["rewards"]
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        except (KeyError, TypeError) as exc:
            raise ParseError(f"line {lineno}: missing field {exc}") from None
        if not (len(s) == len(a) == len(r) == H):
            raise ParseError(f"line {lineno}: episode length differs from H={H}")
        states.append(s)
        actions.append(a)
        rewards.append(r)
    if not states:
        return EpisodeDataset.empty(H, header.get("behavior", ""), int(header.get("seed", 0)))
    return EpisodeDataset(np.array(states), np.array(actions), np.array(rewards),
                          header.get("behavior", ""), int(header.get("seed", 0)))


@dataclass
class ResultRow:
    algo: str
    n: int
    seed: int
    suboptimality: float
    cstar: float
    pessimism_held: bool
    runtime_ms: float

    def as_csv(self) -> list[str]:
        return [self.algo, str(self.n), str(self.seed), repr(float(self.suboptimality)),
                "inf" if math.isinf(self.cstar) else repr(float(self.cstar)),
                "true" if self.pessimism_held else "false", f"{self.runtime_ms:.3f}"]


def rows_to_csv(rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow(row.as_csv())
    return out.getvalue()


def rows_from_csv(text: str) -> list[ResultRow]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("line 1: empty CSV") from None
    if header != CSV_HEADER:
        raise ParseError(f"line 1: unexpected header {header}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        try:
            algo, n, seed, sub, cstar, held, ms = rec
            rows.append(ResultRow(algo, int(n), int(seed), float(sub), float(cstar),
                                  {"true": True, "false": False}[held], float(ms)))
        except (ValueError, KeyError):
            raise ParseError(f"line {lineno}: malformed row {rec}") from None
    return rows


def read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc.strerror}") from None


def write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc.strerror}") from None

