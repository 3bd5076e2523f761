"""Model registry: maps archive-style model names to builtin unit factories."""

from __future__ import annotations

import posixpath
from typing import Callable, Optional

from .base import ModelDescription, SimulationUnit, UnitError
from .broker import Broker, SharedFeed
from .library import Controller, LeakController, LeakDetector, Passthrough, SineSource, WaterTank

ALIASES = {
    "watertankcontroller-c": ("controller", "watertankcontroller"),
    "singlewatertank-20sim": ("tank", "watertank", "singlewatertank"),
    "leak_detector": ("leakdetector",),
    "leak_controller": ("leakcontroller",),
    "sine_source": ("sine",),
    "rmqfmu": ("broker", "rmq"),
    "passthrough": ("actuation",),
}


def model_basename(name: str) -> str:
    """`dir/singlewatertank-20sim.fmu` -> `singlewatertank-20sim`."""
    base = posixpath.basename(name.replace("\\", "/"))
    if base.endswith(".fmu"):
        base = base[:-4]
    return base


class Registry:
    def __init__(self, feed: Optional[SharedFeed] = None):
        self.feed = feed if feed is not None else SharedFeed()
        self._factories = {}
        self._descriptions = {}
        self._aliases = {}
        for cls in (Controller, WaterTank, LeakDetector, LeakController, SineSource, Passthrough):
            self.register(cls.description, cls)
        self.register(Broker.description, lambda instance: Broker(instance, self.feed))
        for name, aliases in ALIASES.items():
            for alias in aliases:
                self._aliases[alias] = name

    def register(self, description: ModelDescription, factory: Callable[[str], SimulationUnit], name=None):
        name = name or description.model_name
        self._factories[name] = factory
        self._descriptions[name] = description

    def resolve(self, model_name: str) -> Optional[str]:
        base = model_basename(model_name)
        if base in self._factories:
            return base
        return self._aliases.get(base)

    def description(self, model_name: str) -> Optional[ModelDescription]:
        key = self.resolve(model_name)
        return self._descriptions.get(key) if key else None

    def __contains__(self, model_name):
        return self.resolve(model_name) is not None

    def names(self) -> list[str]:
        return sorted(self._factories)

    def create(self, model_name: str, instance_name: str) -> SimulationUnit:
        key = self.resolve(model_name)
        if key is None:
            raise UnitError(f"unknown model {model_basename(model_name)}")
        return self._factories[key](instance_name)

    def sandbox(self) -> "Registry":
        """A registry whose units cannot touch this registry's feed."""
        clone = Registry(self.feed.copy())
        for name, factory in self._factories.items():
            if name not in clone._factories:
                clone.register(self._descriptions[name], factory, name)
        clone._aliases.update(self._aliases)
        return clone
