"""Trained expert bundles and the registry the gate selects from."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..errors import MissingExpertError
from ..nn import ParameterSet

NORMAL = "normal"
ROBUST = "robust"
PRIVATE = "private"
COVERT = "covert"
BASE_KINDS = (NORMAL, ROBUST, PRIVATE, COVERT)


@dataclass
class TrainedExpert:
    """A frozen parameter set plus the metadata needed to rebuild and to
    audit it. `model` holds the live layer objects bound to `params`."""

    kind: str
    params: ParameterSet
    manifest: dict
    model: object

    @property
    def rho(self) -> Optional[float]:
        return self.manifest.get("rho")


class ExpertRegistry:
    """Holds one expert per kind, except covert, which is keyed by its
    compression ratio. Extension kinds (registered after initial training)
    keep their registration order."""

    def __init__(self, k: int):
        self.k = k
        self._singles: dict[str, TrainedExpert] = {}
        self._covert: dict[float, TrainedExpert] = {}
        self._extension_order: list[str] = []

    def register(self, expert: TrainedExpert) -> None:
        if expert.kind == COVERT:
            rho = expert.manifest.get("rho")
            if rho is None:
                raise ValueError("covert expert manifest must carry rho")
            self._covert[float(rho)] = expert
            return
        if expert.kind not in BASE_KINDS and expert.kind not in self._singles:
            self._extension_order.append(expert.kind)
        self._singles[expert.kind] = expert

    def has(self, kind: str, rho: Optional[float] = None) -> bool:
        if kind == COVERT:
            return bool(self._covert) if rho is None else float(rho) in self._covert
        return kind in self._singles

    def get(self, kind: str, rho: Optional[float] = None) -> TrainedExpert:
        if kind == COVERT:
            if rho is None:
                raise ValueError("covert lookup needs a compression ratio")
            try:
                return self._covert[float(rho)]
            except KeyError:
                raise MissingExpertError(kind, rho) from None
        try:
            return self._singles[kind]
        except KeyError:
            raise MissingExpertError(kind) from None

    def covert_rhos(self) -> tuple:
        return tuple(sorted(self._covert))

    def kinds(self) -> tuple:
        """Registered kind names: base order first, then extensions."""
        out = [k for k in BASE_KINDS if self.has(k)]
        out.extend(self._extension_order)
        return tuple(out)

    def all_experts(self) -> list:
        out = [self._singles[k] for k in BASE_KINDS if k in self._singles]
        out.extend(self._covert[r] for r in self.covert_rhos())
        out.extend(self._singles[k] for k in self._extension_order)
        return out

    def hashes(self) -> dict:
        """Stable name -> parameter digest for every registered expert."""
        out = {}
        for e in self.all_experts():
            name = f"covert:{e.rho:g}" if e.kind == COVERT else e.kind
            out[name] = e.params.state_hash()
        return out
