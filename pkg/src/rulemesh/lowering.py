"""Slot-constraint lowering shared by both dialect front ends.

Surface languages allow several constraints on one slot; the pivot allows a
slot to carry either one equality constant or one bound variable.  Extra
constraints become guards over the slot's variable, introducing a fresh
synthetic variable when the slot has none yet.
"""
from __future__ import annotations

from .ir import Const, Guard, Term, Var


class SlotLowerer:
    """Per-rule lowering state: fresh synthetic names and the guard list."""

    def __init__(self, taken_names: set[str]):
        self.taken = set(taken_names)
        self.counter = 0
        self.guards: list[Guard] = []

    def fresh(self) -> Var:
        while True:
            name = f"g{self.counter}"
            self.counter += 1
            if name not in self.taken:
                self.taken.add(name)
                return Var(name, synthetic=True)

    def constrain(
        self,
        state: dict[str, tuple[str, Const | Var]],
        slot: str,
        form: str,
        op: str | None,
        rhs: Term,
    ) -> None:
        """Fold one surface constraint into a slot's ("eq" | "bind") state.

        ``form`` is "bind" for binding syntax; "op" carries a comparison with
        ``rhs`` being a constant or a variable.
        """
        is_var_eq = form == "bind" or (op == "==" and isinstance(rhs, Var))
        current = state.get(slot)
        if current is not None and current[0] == "eq":
            # Second constraint on an equated slot: move the constant into a
            # guard over a carrier variable so eq and bind stay disjoint.
            carrier = rhs if is_var_eq else self.fresh()
            state[slot] = ("bind", carrier)
            self.guards.append(Guard(carrier, "==", current[1]))
            if is_var_eq:
                return
            current = state[slot]
        if is_var_eq:
            if current is None:
                state[slot] = ("bind", rhs)
            else:
                self.guards.append(Guard(current[1], "==", rhs))
            return
        if op == "==":
            if current is None:
                state[slot] = ("eq", rhs)
            else:
                self.guards.append(Guard(current[1], "==", rhs))
            return
        if current is None:
            carrier = self.fresh()
            state[slot] = ("bind", carrier)
        else:
            carrier = current[1]
        self.guards.append(Guard(carrier, op, rhs))


def split_state(state: dict[str, tuple[str, Const | Var]]) -> tuple[dict[str, Const], dict[str, Var]]:
    slot_eq = {s: v for s, (k, v) in state.items() if k == "eq"}
    slot_bind = {s: v for s, (k, v) in state.items() if k == "bind"}
    return slot_eq, slot_bind
