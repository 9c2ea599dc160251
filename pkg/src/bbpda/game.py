"""The attacker/defender branching-bisimulation game.

A play alternates: attacker fires a transition on one side; defender
answers with do-nothing (silent attacks only) or a silent chain ending in
the attacked label; attacker then picks the next configuration among the
final pair and the chain's intermediate pairs.  Attacker wins when defender
is stuck or the configuration violates selection identity; defender wins
by surviving.
"""

from __future__ import annotations

from dataclasses import dataclass

from .equivalence import BoundedChecker, _selection_compatible
from .system import EPSILON, PdaSystem, SystemError
from .terms import Process, format_term, term_key


@dataclass(frozen=True)
class GameConfig:
    left: Process
    right: Process

    def format(self) -> str:
        return f"{format_term(self.left)} | {format_term(self.right)}"


@dataclass(frozen=True)
class Attack:
    side: str  # "left" | "right"
    label: str
    target: Process

    def format(self) -> str:
        return f"A {self.side} {self.label} -> {format_term(self.target)}"


@dataclass(frozen=True)
class Response:
    kind: str  # "nothing" | "chain"
    intermediates: tuple = ()
    final: Process | None = None

    def format(self, label: str) -> str:
        if self.kind == "nothing":
            return "D nothing"
        return f"D eps* {label} -> {format_term(self.final)}"


class ScriptError(ValueError):
    """A scripted move was illegal or malformed; distinct from a loss."""


@dataclass
class PlayOutcome:
    winner: str  # "attacker" | "defender" | "undetermined" | "script-error"
    rounds: int
    trace: tuple
    final: GameConfig

    def format(self) -> str:
        lines = [f"winner {self.winner}", f"rounds {self.rounds}"]
        lines.extend(self.trace)
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# legal moves
# ---------------------------------------------------------------------------


def legal_attacks(system: PdaSystem, config: GameConfig):
    out = [Attack("left", lab, t) for lab, t in system.step(config.left)]
    out += [Attack("right", lab, t) for lab, t in system.step(config.right)]
    out.sort(key=lambda a: (a.side, a.label, term_key(a.target)))
    return tuple(out)


def legal_defender_responses(
    system: PdaSystem,
    config: GameConfig,
    attack: Attack,
    silent_cap=None,
    closure_budget: int = 2048,
):
    """Materialized defender responses to an attack.

    Chains are represented by their shortest silent prefix to each closure
    node (one canonical chain per (node, final) pair); ``silent_cap`` bounds
    the prefix length and is required on silent-head-cyclic systems.
    """
    if silent_cap is None and system.has_silent_head_cycles:
        raise SystemError("response enumeration needs a silent cap on this system")
    other = config.right if attack.side == "left" else config.left
    responses = []
    if attack.label == EPSILON:
        responses.append(Response("nothing"))
    paths = {other: ()}
    queue = [other]
    while queue:
        u = queue.pop(0)
        path = paths[u]
        for lab, v in system.step(u):
            if lab == attack.label:
                responses.append(Response("chain", path, v))
            if (
                lab == EPSILON
                and v not in paths
                and (silent_cap is None or len(path) + 1 <= silent_cap)
                and len(paths) < closure_budget
            ):
                paths[v] = path + (v,)
                queue.append(v)
    responses.sort(
        key=lambda r: (
            r.kind != "nothing",
            len(r.intermediates),
            term_key(r.final) if r.final is not None else "",
            tuple(term_key(t) for t in r.intermediates),
        )
    )
    return tuple(responses)


def response_choices(config: GameConfig, attack: Attack, response: Response):
    """Attacker's follow-up configurations: final pair first, then one pair
    per chain intermediate in chain order."""
    stay = config.left if attack.side == "left" else config.right
    if response.kind == "nothing":
        if attack.side == "left":
            return (GameConfig(attack.target, config.right),)
        return (GameConfig(config.left, attack.target),)
    if attack.side == "left":
        out = [GameConfig(attack.target, response.final)]
        out += [GameConfig(stay, w) for w in response.intermediates]
    else:
        out = [GameConfig(response.final, attack.target)]
        out += [GameConfig(w, stay) for w in response.intermediates]
    return tuple(out)


# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------


class Strategy:
    def attack(self, config: GameConfig):
        raise NotImplementedError

    def respond(self, config: GameConfig, attack: Attack, legal):
        raise NotImplementedError

    def pick(self, config: GameConfig, attack: Attack, response: Response, choices):
        raise NotImplementedError


class ScriptedStrategy(Strategy):
    """Replays script lines for one role; illegal moves raise ScriptError."""

    def __init__(self, moves, system: PdaSystem, role: str):
        self.system = system
        self.role = role  # "A" | "D"
        self.moves = [m for m in moves if m[0] == self.role]
        self.pos = 0

    def _next(self, kinds):
        if self.pos >= len(self.moves):
            raise ScriptError(f"script for {self.role} exhausted")
        move = self.moves[self.pos]
        if move[1] not in kinds:
            raise ScriptError(f"expected {kinds}, script has {move[1]}")
        self.pos += 1
        return move

    def attack(self, config: GameConfig):
        _, _, side, label, target = self._next(("attack",))
        att = Attack(side, label, target)
        if att not in legal_attacks(self.system, config):
            raise ScriptError(f"illegal attack {att.format()}")
        return att

    def respond(self, config, attack, legal):
        move = self._next(("respond", "nothing"))
        if move[1] == "nothing":
            for r in legal:
                if r.kind == "nothing":
                    return r
            raise ScriptError("do-nothing response not available")
        _, _, label, final = move
        if label != attack.label:
            raise ScriptError(f"response label {label} does not match attack {attack.label}")
        for r in legal:
            if r.kind == "chain" and r.final == final:
                return r
        raise ScriptError(f"no legal chain ends at {format_term(final)}")

    def pick(self, config, attack, response, choices):
        _, _, index = self._next(("pick",))
        if not 1 <= index <= len(choices):
            raise ScriptError(f"pick {index} out of range 1..{len(choices)}")
        return index - 1


class SolverStrategy(Strategy):
    """Plays by the bounded game value at a fixed depth."""

    def __init__(self, system: PdaSystem, depth: int, silent_cap=None):
        self.system = system
        self.depth = depth
        self.silent_cap = silent_cap
        self.checker = BoundedChecker(system, silent_cap=silent_cap)

    def _least_failing(self, config: GameConfig):
        for k in range(self.depth + 1):
            if not self.checker.rel(config.left, config.right, k):
                return k
        return None

    def attack(self, config: GameConfig):
        k = self._least_failing(config)
        atts = legal_attacks(self.system, config)
        if not atts:
            return None
        if k is None or k == 0:
            return atts[0]
        found = self.checker.find_attack(config.left, config.right, k)
        if found is None:
            return atts[0]
        side, label, target = found
        return Attack(side, label, target)

    def respond(self, config, attack, legal):
        if not legal:
            return None
        best, best_val = None, -1

        def value(cfg):
            for k in range(self.depth + 1):
                if not self.checker.rel(cfg.left, cfg.right, k):
                    return k
            return self.depth + 1

        for r in legal:
            worst = min(value(c) for c in response_choices(config, attack, r))
            if worst > best_val:
                best, best_val = r, worst
        return best

    def pick(self, config, attack, response, choices):
        def value(cfg):
            for k in range(self.depth + 1):
                if not self.checker.rel(cfg.left, cfg.right, k):
                    return k
            return self.depth + 1

        return min(range(len(choices)), key=lambda i: (value(choices[i]), i))


class CopycatStrategy(Strategy):
    """Defender mirror play; never loses from a diagonal configuration."""

    def __init__(self, system: PdaSystem):
        self.system = system

    def respond(self, config, attack, legal):
        for r in legal:
            if r.kind == "chain" and not r.intermediates and r.final == attack.target:
                return r
        for r in legal:
            if r.kind == "nothing":
                return r
        return legal[0] if legal else None


# ---------------------------------------------------------------------------
# play execution
# ---------------------------------------------------------------------------


def run_play(
    system: PdaSystem,
    start: GameConfig,
    attacker: Strategy,
    defender: Strategy,
    max_rounds: int = 64,
    silent_cap=None,
) -> PlayOutcome:
    """Execute the alternating game for up to max_rounds rounds."""
    config = start
    trace = [f"config {config.format()}"]
    try:
        for rnd in range(max_rounds):
            if not _selection_compatible(config.left, config.right):
                trace.append("A stuck selection-mismatch")
                return PlayOutcome("attacker", rnd, tuple(trace), config)
            attacks = legal_attacks(system, config)
            if not attacks:
                trace.append("A no-move")
                return PlayOutcome("defender", rnd, tuple(trace), config)
            attack = attacker.attack(config)
            if attack is None:
                trace.append("A concede")
                return PlayOutcome("defender", rnd, tuple(trace), config)
            if attack not in attacks:
                raise ScriptError(f"illegal attack {attack.format()}")
            trace.append(attack.format())
            legal = legal_defender_responses(system, config, attack, silent_cap=silent_cap)
            response = defender.respond(config, attack, legal)
            if response is None:
                trace.append("D stuck")
                return PlayOutcome("attacker", rnd + 1, tuple(trace), config)
            if response not in legal:
                raise ScriptError("illegal defender response")
            trace.append(response.format(attack.label))
            choices = response_choices(config, attack, response)
            if len(choices) == 1:
                config = choices[0]
            else:
                i = attacker.pick(config, attack, response, choices)
                trace.append(f"A pick {i + 1}")
                config = choices[i]
            trace.append(f"config {config.format()}")
        return PlayOutcome("undetermined", max_rounds, tuple(trace), config)
    except ScriptError as exc:
        trace.append(f"script-error {exc}")
        return PlayOutcome("script-error", len(trace), tuple(trace), config)


# ---------------------------------------------------------------------------
# bounded solving
# ---------------------------------------------------------------------------


@dataclass
class SolveResult:
    winner: str  # "attacker" | "defender"
    depth: int
    variation: tuple  # principal-variation script lines
    spent: int

    def format(self) -> str:
        qualifier = "wins" if self.winner == "attacker" else "survives"
        lines = [f"{self.winner} {qualifier} at depth {self.depth}"]
        lines.extend(self.variation)
        return "\n".join(lines)


def solve_bounded(
    start: GameConfig,
    system: PdaSystem,
    depth: int,
    silent_cap=None,
    canon=None,
    horizon: bool = False,
) -> SolveResult:
    """Game value at bounded depth.

    Attacker wins are genuine distinguishing strategies; defender survival
    is evidence only (the game characterizes a greatest fixpoint).
    """
    checker = BoundedChecker(
        system, silent_cap=silent_cap, canon=canon, horizon=horizon
    )
    if checker.rel(start.left, start.right, depth):
        return SolveResult("defender", depth, (), len(checker._memo))
    attacker = SolverStrategy(system, depth, silent_cap=silent_cap)
    attacker.checker = checker
    defender = SolverStrategy(system, depth, silent_cap=silent_cap)
    defender.checker = checker
    outcome = run_play(system, start, attacker, defender, max_rounds=depth + 1, silent_cap=silent_cap)
    return SolveResult("attacker", depth, outcome.trace, len(checker._memo))


# ---------------------------------------------------------------------------
# scripts and DOT
# ---------------------------------------------------------------------------


def parse_script(text: str, system: PdaSystem):
    """Parse game-script lines into role-tagged move tuples."""
    from .system import ParseError, parse_term

    moves = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 3)
        if parts[0] == "A" and parts[1] in ("left", "right"):
            label = parts[2]
            term_text = parts[3]
            if not term_text.startswith("->"):
                raise ParseError("attack line needs '->'", lineno)
            moves.append(("A", "attack", parts[1], label, parse_term(term_text[2:], system)))
        elif parts[0] == "A" and parts[1] == "pick":
            moves.append(("A", "pick", int(parts[2])))
        elif parts[0] == "D" and parts[1] == "nothing":
            moves.append(("D", "nothing"))
        elif parts[0] == "D" and parts[1] == "eps*":
            label = parts[2]
            term_text = parts[3]
            if not term_text.startswith("->"):
                raise ParseError("response line needs '->'", lineno)
            moves.append(("D", "respond", label, parse_term(term_text[2:], system)))
        else:
            raise ParseError(f"unrecognized script line {line!r}", lineno)
    return moves


def format_script(moves) -> str:
    lines = []
    for m in moves:
        if m[1] == "attack":
            lines.append(f"A {m[2]} {m[3]} -> {format_term(m[4])}")
        elif m[1] == "pick":
            lines.append(f"A pick {m[2]}")
        elif m[1] == "nothing":
            lines.append("D nothing")
        else:
            lines.append(f"D eps* {m[2]} -> {format_term(m[3])}")
    return "\n".join(lines) + "\n"


def play_dot(outcome: PlayOutcome) -> str:
    """DOT rendering of a play trace as a move path."""
    lines = ["digraph play {", "  rankdir=TB;"]
    node = 0
    prev = None
    for entry in outcome.trace:
        label = entry.replace('"', "'")
        shape = "box" if entry.startswith("config") else "ellipse"
        lines.append(f'  n{node} [label="{label}", shape={shape}];')
        if prev is not None:
            lines.append(f"  n{prev} -> n{node};")
        prev = node
        node += 1
    lines.append(f'  outcome [label="winner: {outcome.winner}", shape=diamond];')
    if prev is not None:
        lines.append(f"  n{prev} -> outcome;")
    lines.append("}")
    return "\n".join(lines)
