import json
import logging
import os
import shutil
from typing import Any, Dict, List

import numpy as np

from src.ghost import CoincidenceImage
from src.interfaces import IResultWriter
from src.scene import GridGeometry, ObjectMask, save_mask, write_pgm

logger = logging.getLogger(__name__)

MAP_BITS = 16


def to_levels(values: np.ndarray, bits: int = MAP_BITS):
    """Linear map of [min, max] onto [0, 2^bits - 1]. A constant map becomes all zeros."""
    values = np.asarray(values, dtype=float)
    low, high = float(np.min(values)), float(np.max(values))
    top = (1 << bits) - 1
    if high > low:
        levels = np.round((values - low) / (high - low) * top)
    else:
        levels = np.zeros_like(values)
    return levels.astype(np.uint16 if bits == 16 else np.uint8), {'min': low, 'max': high, 'bits': bits}


def from_levels(levels: np.ndarray, sidecar: Dict[str, Any]) -> np.ndarray:
    top = (1 << int(sidecar['bits'])) - 1
    return sidecar['min'] + levels.astype(float) / top * (sidecar['max'] - sidecar['min'])


class ResultWriter(IResultWriter):
    """
    Writes results into `output_dir`. Each file is written to a temporary name
    and moved into place once complete.
    """

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        self.written: List[str] = []
        os.makedirs(self.output_dir, exist_ok=True)

    def _temp_path(self, filename: str) -> str:
        stem, ext = os.path.splitext(filename)
        return os.path.join(self.output_dir, f"temp_{stem}_{os.urandom(4).hex()}{ext}")

    def _finalize(self, temp_path: str, filename: str) -> str:
        final_path = os.path.join(self.output_dir, filename)
        if os.path.exists(final_path):
            os.remove(final_path)
        try:
            shutil.move(temp_path, final_path)
        except OSError as e:
            logger.error(f"Error renaming temp file {temp_path}: {e}")
            if os.path.exists(temp_path):
                os.remove(temp_path)
            raise
        self.written.append(final_path)
        logger.debug(f"Wrote {os.path.basename(final_path)}")
        return final_path

    def _write_text_file(self, filename: str, text: str) -> str:
        temp_path = self._temp_path(filename)
        with open(temp_path, 'w', encoding='utf-8', newline='\n') as handle:
            handle.write(text)
        return self._finalize(temp_path, filename)

    def write_profile(self, name: str, grid: GridGeometry, values: np.ndarray) -> str:
        lines = ["coordinate,value"]
        for x, v in zip(grid.axis(), np.asarray(values, dtype=float)):
            lines.append(f"{x:.17g},{v:.17g}")
        return self._write_text_file(f"{name}.csv", "\n".join(lines) + "\n")

    def write_map(self, name: str, values: np.ndarray) -> str:
        levels, sidecar = to_levels(values)
        temp_path = self._temp_path(f"{name}.pgm")
        write_pgm(temp_path, levels)
        path = self._finalize(temp_path, f"{name}.pgm")
        self.write_json(name, sidecar)
        return path

    def write_image(self, name: str, image: CoincidenceImage) -> str:
        if image.grid.dims == 1:
            return self.write_profile(name, image.grid, image.rate)
        return self.write_map(name, image.rate)

    def write_array(self, name: str, grid: GridGeometry, values: np.ndarray) -> Dict[str, str]:
        paths = {'pgm': self.write_map(name, values)}
        if grid.dims == 1:
            paths['csv'] = self.write_profile(name, grid, values)
        return paths

    def write_mask(self, name: str, mask: ObjectMask) -> str:
        temp_path = self._temp_path(f"{name}.pgm")
        save_mask(mask, temp_path, bits=8)
        return self._finalize(temp_path, f"{name}.pgm")

    def write_json(self, name: str, data: Dict[str, Any]) -> str:
        return self._write_text_file(f"{name}.json", json.dumps(data, indent=2, sort_keys=True) + "\n")

    def write_text(self, name: str, text: str) -> str:
        return self._write_text_file(f"{name}.txt", text)
