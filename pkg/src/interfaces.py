from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Any, Dict

import numpy as np

from src.aberration import PhaseMap
from src.scene import GridGeometry, ObjectMask, OpticalLayout, PumpModel


@dataclass(frozen=True)
class Scene:
    """
    Shared inputs of every engine. `obj` lives on the detector grid, `phase`
    on the lens grid of the same lattice.
    """
    layout: OpticalLayout
    obj: ObjectMask
    phase: PhaseMap
    pump: PumpModel = PumpModel()

    @property
    def grid(self) -> GridGeometry:
        return self.obj.grid

    def without_aberration(self) -> 'Scene':
        return replace(self, phase=PhaseMap.zeros(self.phase.grid))


class IImagingEngine(ABC):
    """
    Interface for the imaging engines (ghost paths and the baseline).
    """
    name: str = ''

    @abstractmethod
    def render(self, scene: Scene, options: Any):
        """
        Renders the scene and returns a CoincidenceImage.
        """
        pass


class IResultWriter(ABC):
    """
    Interface for writing run results into an output directory.
    """
    @abstractmethod
    def write_image(self, name: str, image: Any) -> str:
        """
        Writes a CoincidenceImage: CSV profile in 1D, 16-bit PGM plus sidecar in 2D.
        """
        pass

    @abstractmethod
    def write_array(self, name: str, grid: GridGeometry, values: np.ndarray) -> Dict[str, str]:
        """
        Writes a real map as 16-bit PGM plus sidecar (and a CSV profile in 1D).
        """
        pass

    @abstractmethod
    def write_mask(self, name: str, mask: ObjectMask) -> str:
        pass

    @abstractmethod
    def write_json(self, name: str, data: Dict[str, Any]) -> str:
        pass

    @abstractmethod
    def write_text(self, name: str, text: str) -> str:
        pass
