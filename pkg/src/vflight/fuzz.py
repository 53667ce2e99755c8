"""Seeded random mini-IR programs for differential testing."""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .frontend import Call, Condition, Copy, Deref, FunctionIR, If, NullConst, Phi, ProgramIR, Return, Stmt
from .frontend import parse_program, print_program, walk


@dataclass
class FuzzConfig:
    max_funcs: int = 12
    max_stmts: int = 60
    max_params: int = 2
    max_depth: int = 2
    recursion_rate: float = 0.05
    opaque_rate: float = 0.1


class _Gen:
    def __init__(self, rng: random.Random, cfg: FuzzConfig):
        self.rng = rng
        self.cfg = cfg
        self.line = 0
        self.budget = 0
        self.var_id = 0

    def next_line(self) -> int:
        self.line += 1
        return self.line

    def fresh(self) -> str:
        self.var_id += 1
        return f"v{self.var_id}"

    def block(self, i: int, sigs, visible: list[str], depth: int, size: int) -> tuple[tuple[Stmt, ...], list[str]]:
        rng = self.rng
        out: list[Stmt] = []
        visible = list(visible)
        for _ in range(size):
            if self.budget <= 0:
                break
            self.budget -= 1
            roll = rng.random()
            if roll < 0.2 or not visible:
                v = self.fresh()
                out.append(NullConst(self.next_line(), v))
                visible.append(v)
            elif roll < 0.35:
                v = self.fresh()
                out.append(Copy(self.next_line(), v, rng.choice(visible)))
                visible.append(v)
            elif roll < 0.6:
                callee = self.pick_callee(i, len(sigs))
                if callee is None:
                    continue
                nparams, has_ret = sigs[callee]
                args = tuple(rng.choice(visible) for _ in range(nparams))
                target = self.fresh() if has_ret and rng.random() < 0.85 else None
                out.append(Call(self.next_line(), target, f"f{callee}", args))
                if target:
                    visible.append(target)
            elif roll < 0.8 and depth < self.cfg.max_depth:
                out.extend(self.branch(i, sigs, visible, depth))
            else:
                out.append(Deref(self.next_line(), rng.choice(visible)))
        return tuple(out), visible

    def pick_callee(self, i: int, n: int) -> Optional[int]:
        rng = self.rng
        if rng.random() < self.cfg.recursion_rate:
            return rng.randint(0, i)
        if i + 1 >= n:
            return None
        return rng.randint(i + 1, n - 1)

    def branch(self, i: int, sigs, visible: list[str], depth: int) -> list[Stmt]:
        rng = self.rng
        var = rng.choice(visible)
        if rng.random() < self.cfg.opaque_rate:
            cond = Condition(var, rng.choice(["<", ">="]), str(rng.randint(0, 9)))
        else:
            cond = Condition(var, rng.choice(["==", "!="]))
        line = self.next_line()
        then, then_vis = self.block(i, sigs, visible, depth + 1, rng.randint(0, 3))
        orelse: tuple[Stmt, ...] = ()
        else_vis = list(visible)
        if rng.random() < 0.6:
            orelse, else_vis = self.block(i, sigs, visible, depth + 1, rng.randint(0, 3))
        out: list[Stmt] = [If(line, cond, then, orelse)]
        for _ in range(rng.choice([0, 1, 1, 2])):
            if self.budget <= 0:
                break
            self.budget -= 1
            v = self.fresh()
            out.append(Phi(self.next_line(), v, rng.choice(then_vis), rng.choice(else_vis)))
            visible.append(v)
        return out


def random_program(seed: int, cfg: FuzzConfig = FuzzConfig()) -> ProgramIR:
    """A valid program with at most ``cfg.max_funcs`` functions and
    ``cfg.max_stmts`` statements, mostly calling toward higher-numbered
    functions with the odd recursive edge."""
    rng = random.Random(seed)
    n = rng.randint(1, cfg.max_funcs)
    sigs = [(rng.randint(0, cfg.max_params), rng.random() < 0.7) for _ in range(n)]
    gen = _Gen(rng, cfg)
    gen.budget = rng.randint(n, max(n, cfg.max_stmts - 2 * n))
    share = max(1, gen.budget // n)
    funcs = []
    for i in range(n):
        header = gen.next_line()
        params = tuple(gen.fresh() for _ in range(sigs[i][0]))
        body, visible = gen.block(i, sigs, list(params), 0, rng.randint(1, share + 2))
        tail: list[Stmt] = []
        if sigs[i][1]:
            if not visible:
                v = gen.fresh()
                tail.append(NullConst(gen.next_line(), v))
                visible.append(v)
            tail.append(Return(gen.next_line(), rng.choice(visible)))
        funcs.append(FunctionIR(f"f{i}", header, params, body + tuple(tail)))
    # Round-trip through the printer so the result is exactly what parsing
    # the text would give, and so validation runs.
    return parse_program(print_program(ProgramIR(tuple(funcs))))


def statement_count(p: ProgramIR) -> int:
    return sum(1 for f in p.functions for _ in walk(f.body))
