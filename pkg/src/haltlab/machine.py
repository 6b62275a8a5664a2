"""Unbounded-register machine: program numbering, bounded execution, dovetailing.

Programs are finite lists of two instructions:

* ``INC r``       -- increment register ``r`` and fall through.
* ``DECJZ r a``   -- if register ``r`` is zero jump to ``a``, otherwise
  decrement it and fall through.

A machine halts as soon as its program counter leaves the instruction list,
so every list of instructions is a valid program and the numbering below is
a total bijection between programs and the non-negative integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isqrt
from typing import Union

__all__ = [
    "Inc",
    "DecJz",
    "Instruction",
    "Program",
    "Halted",
    "Exhausted",
    "RunOutcome",
    "Machine",
    "pair",
    "unpair",
    "encode_instruction",
    "decode_instruction",
    "encode_program",
    "decode_program",
    "run_bounded",
    "run_program",
]


@dataclass(frozen=True)
class Inc:
    reg: int

    def __str__(self) -> str:
        return f"INC {self.reg}"


@dataclass(frozen=True)
class DecJz:
    reg: int
    target: int

    def __str__(self) -> str:
        return f"DECJZ {self.reg} {self.target}"


Instruction = Union[Inc, DecJz]


@dataclass(frozen=True)
class Program:
    instructions: tuple[Instruction, ...] = ()

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def __str__(self) -> str:
        return "[" + "; ".join(str(i) for i in self.instructions) + "]"


@dataclass(frozen=True)
class Halted:
    steps: int

    @property
    def halted(self) -> bool:
        return True


@dataclass(frozen=True)
class Exhausted:
    bound: int

    @property
    def halted(self) -> bool:
        return False

    @property
    def steps(self) -> int:
        return self.bound


RunOutcome = Union[Halted, Exhausted]


def _check_natural(name: str, value: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise ValueError(f"{name} must be a non-negative integer, got {value!r}")


# -- numbering ---------------------------------------------------------------

def pair(a: int, b: int) -> int:
    """Cantor pairing: ``(a+b)(a+b+1)/2 + b``."""
    _check_natural("a", a)
    _check_natural("b", b)
    s = a + b
    return s * (s + 1) // 2 + b


def unpair(n: int) -> tuple[int, int]:
    _check_natural("n", n)
    w = (isqrt(8 * n + 1) - 1) // 2
    b = n - w * (w + 1) // 2
    return w - b, b


def encode_instruction(instr: Instruction) -> int:
    if isinstance(instr, Inc):
        return 2 * instr.reg
    if isinstance(instr, DecJz):
        return 2 * pair(instr.reg, instr.target) + 1
    raise TypeError(f"not an instruction: {instr!r}")


def decode_instruction(code: int) -> Instruction:
    _check_natural("code", code)
    if code % 2 == 0:
        return Inc(code // 2)
    return DecJz(*unpair(code // 2))


def encode_program(program: Program | list | tuple) -> int:
    """Return the index of ``program``; the empty program is 0."""
    code = 0
    for instr in reversed(tuple(program)):
        code = pair(encode_instruction(instr), code) + 1
    return code


def decode_program(n: int) -> Program:
    _check_natural("n", n)
    out = []
    while n > 0:
        head, n = unpair(n - 1)
        out.append(decode_instruction(head))
    return Program(tuple(out))


# -- execution ---------------------------------------------------------------

def _compile(program: Program):
    """Lower a program to parallel lists over compacted register slots.

    Slot 0 is always register 0 (the input register), whether or not the
    program mentions it.
    """
    slots = {0: 0}
    ops, regs, targets = [], [], []
    for instr in program:
        slot = slots.setdefault(instr.reg, len(slots))
        if isinstance(instr, Inc):
            ops.append(False)
            targets.append(0)
        else:
            ops.append(True)
            targets.append(instr.target)
        regs.append(slot)
    return ops, regs, targets, slots


class Machine:
    """Resumable execution cursor for one program.

    ``Machine`` is the single-step interface used by the dovetailer;
    :func:`run_bounded` is the fast path for running one program to a bound.
    """

    def __init__(self, program: Program, input_value: int = 0):
        _check_natural("input", input_value)
        self.program = program
        self._ops, self._regs, self._targets, self._slots = _compile(program)
        self.registers = [0] * len(self._slots)
        self.registers[0] = input_value
        self.pc = 0
        self.steps = 0

    @property
    def halted(self) -> bool:
        return self.pc >= len(self._ops)

    def register_map(self) -> dict[int, int]:
        """Sparse view of the registers: register index -> value (non-zero only)."""
        return {r: self.registers[s] for r, s in self._slots.items() if self.registers[s]}

    def step(self) -> bool:
        """Execute one instruction; returns False when already halted."""
        pc = self.pc
        if pc >= len(self._ops):
            return False
        slot = self._regs[pc]
        if self._ops[pc]:
            if self.registers[slot] == 0:
                self.pc = self._targets[pc]
            else:
                self.registers[slot] -= 1
                self.pc = pc + 1
        else:
            self.registers[slot] += 1
            self.pc = pc + 1
        self.steps += 1
        return True

    def run(self, bound: int) -> RunOutcome:
        """Advance until halted or until the total step count reaches ``bound``."""
        while self.steps < bound and self.step():
            pass
        return Halted(self.steps) if self.halted else Exhausted(bound)


def run_program(program: Program, input_value: int, bound: int) -> RunOutcome:
    """Run ``program`` with register 0 set to ``input_value`` for at most ``bound`` steps.

    A repeated machine state proves the run can never halt, so such runs are
    cut short and reported as ``Exhausted(bound)`` immediately; the outcome is
    the same one a full simulation would return. Repetition is detected with
    Brent's method over the states seen at taken jumps (every cycle contains
    one), so memory stays constant.
    """
    _check_natural("input", input_value)
    _check_natural("bound", bound)
    ops, regs, targets, slots = _compile(program)
    size = len(ops)
    r = [0] * len(slots)
    r[0] = input_value
    pc = 0
    steps = 0
    saved = None
    power = lam = 1
    while pc < size:
        if steps >= bound:
            return Exhausted(bound)
        slot = regs[pc]
        steps += 1
        if ops[pc]:
            if r[slot]:
                r[slot] -= 1
                pc += 1
            else:
                pc = targets[pc]
                state = (pc, *r)
                if state == saved:
                    return Exhausted(bound)
                if lam == power:
                    saved = state
                    power <<= 1
                    lam = 0
                lam += 1
        else:
            r[slot] += 1
            pc += 1
    return Halted(steps)


def run_bounded(x: int, input_value: int, bound: int) -> RunOutcome:
    """Run program number ``x`` on ``input_value`` for at most ``bound`` steps."""
    return run_program(decode_program(x), input_value, bound)
