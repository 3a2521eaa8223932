"""Frontend: source text -> AST -> flat IR.

Thin facade over the syntax (lexer/parser/AST), ir (instruction set) and
lower (AST-to-IR translation) submodules, exposing the two pipeline
operations the rest of the analyzer consumes.
"""

from __future__ import annotations

from typing import Optional

from .ir import ContractIR as IRProgram
from .ir import FunctionIR, contract_to_str
from .lower import lower_contract, lower_unit
from .syntax import SourceUnit, parse_source, unit_to_str

__all__ = ["parse_source", "lower", "lower_unit", "IRProgram", "FunctionIR",
           "SourceUnit", "unit_to_str", "contract_to_str"]


def lower(unit: SourceUnit, contract: Optional[str] = None) -> IRProgram:
    """Lower one contract of a parsed unit (the only one by default)."""
    if contract is not None:
        return lower_contract(unit, unit.contract(contract))
    if len(unit.contracts) != 1:
        raise ValueError(
            f"unit has {len(unit.contracts)} contracts; name one explicitly")
    return lower_contract(unit, unit.contracts[0])
