"""
Scenario files: strict YAML schema with line-numbered errors.

Every section is optional except `schema_version`; missing values fall back
to config.settings. Unknown keys are rejected.
"""
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import yaml

import config.settings as settings
from src.aberration import AberrationSpec, MonomialTerm, ZernikeTerm, project_parity, synthesize_phase
from src.errors import ConfigError
from src.interfaces import Scene
from src.noise import NoiseSettings
from src.scene import GridGeometry, ObjectSpec, OpticalLayout, PumpModel, STANDARD_OBJECTS, make_layout

logger = logging.getLogger(__name__)

_MISSING = object()


class _Section(dict):
    """Mapping that remembers the line of itself and of each key."""
    line: Optional[int] = None

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.lines: Dict[str, int] = {}


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_section(loader: _LineLoader, node: yaml.MappingNode) -> _Section:
    loader.flatten_mapping(node)
    section = _Section()
    section.line = node.start_mark.line + 1
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        line = key_node.start_mark.line + 1
        if key in section:
            raise ConfigError(f"duplicate key '{key}'", line)
        section[key] = loader.construct_object(value_node, deep=True)
        section.lines[key] = line
    return section


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_section)


def _convert(value: Any, kind: type, where: str, line: Optional[int]) -> Any:
    if kind is bool:
        if isinstance(value, bool):
            return value
    elif kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif kind is float:
        # YAML 1.1 reads 5e-7 as a string
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
    elif kind is str:
        if isinstance(value, str):
            return value
    elif kind is list:
        if isinstance(value, list):
            return value
    raise ConfigError(f"'{where}' must be of type {kind.__name__}, got {value!r}", line)


class _Reader:
    """Consumes keys of one section and reports whatever is left over."""

    def __init__(self, section: Any, path: str, line: Optional[int] = None):
        if not isinstance(section, dict):
            raise ConfigError(f"'{path or 'document'}' must be a mapping", line)
        self.section = section
        self.path = path
        self.origin = line
        self.used = set()

    def line(self, key: Optional[str] = None) -> Optional[int]:
        lines = getattr(self.section, 'lines', {})
        if key is not None and key in lines:
            return lines[key]
        return self.origin if self.origin is not None else getattr(self.section, 'line', None)

    def where(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def has(self, key: str) -> bool:
        return key in self.section

    def take(self, key: str, kind: type, default: Any = _MISSING) -> Any:
        self.used.add(key)
        if key not in self.section or self.section[key] is None:
            if default is _MISSING:
                raise ConfigError(f"missing required key '{self.where(key)}'", self.line())
            return default
        return _convert(self.section[key], kind, self.where(key), self.line(key))

    def sub(self, key: str) -> Optional['_Reader']:
        self.used.add(key)
        if key not in self.section or self.section[key] is None:
            return None
        return _Reader(self.section[key], self.where(key), self.line(key))

    def finish(self):
        for key in self.section:
            if key not in self.used:
                raise ConfigError(f"unknown key '{self.where(key)}'", self.line(key))


def _parse(path: str) -> _Reader:
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            document = yaml.load(handle, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, 'problem_mark', None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"{path}: YAML syntax error: {getattr(exc, 'problem', exc)}", line) from exc
    if document is None:
        raise ConfigError(f"{path}: empty scenario file", 1)
    root = _Reader(document, '', 1)
    version = root.take('schema_version', int)
    if version != settings.SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}, expected {settings.SCHEMA_VERSION}",
                          root.line('schema_version'))
    return root


def _rethrow(exc: ConfigError, line: Optional[int]) -> ConfigError:
    return exc if exc.line is not None else ConfigError(exc.message, line)


@dataclass(frozen=True)
class ScenarioConfig:
    schema_version: int
    layout: OpticalLayout
    grid: GridGeometry
    aberration: AberrationSpec
    project: str = 'full'
    obj: ObjectSpec = ObjectSpec()
    pump: PumpModel = PumpModel()
    engines: Tuple[str, ...] = settings.ENGINES
    n_steer: Optional[int] = None
    classical_max_points: int = settings.CLASSICAL_MAX_POINTS
    oracle_max_samples: int = settings.ORACLE_MAX_SAMPLES
    far_field: bool = True
    oversample: int = settings.BASELINE_OVERSAMPLE
    illumination: str = 'plane'
    output: Optional[str] = None
    seed: Optional[int] = None

    @property
    def lens_grid(self) -> GridGeometry:
        return self.layout.lens_grid(self.grid)

    def build_scene(self) -> Scene:
        obj = self.obj.build(self.grid)
        phase = project_parity(synthesize_phase(self.aberration, self.lens_grid), self.project)
        return Scene(self.layout, obj, phase, self.pump)


def _read_layout(reader: Optional[_Reader]) -> OpticalLayout:
    if reader is None:
        return make_layout(settings.WAVELENGTH, settings.Z1, settings.Z2)
    wavelength = reader.take('wavelength', float, settings.WAVELENGTH)
    z1 = reader.take('z1', float, settings.Z1)
    z2 = reader.take('z2', float, settings.Z2)
    focal = reader.take('focal_length', float, None)
    reader.finish()
    try:
        return make_layout(wavelength, z1, z2, focal)
    except ConfigError as exc:
        raise _rethrow(exc, reader.line('focal_length' if focal is not None else None)) from exc


def _read_grid(reader: Optional[_Reader]) -> GridGeometry:
    if reader is None:
        return GridGeometry(1, settings.SAMPLES_1D, settings.EXTENT)
    dims = reader.take('dims', int, 1)
    samples = reader.take('samples', int, settings.SAMPLES_1D if dims == 1 else settings.SAMPLES_2D)
    extent = reader.take('extent', float, settings.EXTENT)
    reader.finish()
    try:
        return GridGeometry(dims, samples, extent)
    except ConfigError as exc:
        raise _rethrow(exc, reader.line()) from exc


def _read_term(item: Any, index: int, line: Optional[int], half_extent: float):
    reader = _Reader(item, f"aberration.terms[{index}]", line)
    kind = reader.take('kind', str)
    if kind == 'zernike':
        term = ZernikeTerm(reader.take('noll', int), reader.take('coefficient', float))
    elif kind == 'monomial':
        px = reader.take('px', int)
        py = reader.take('py', int, None)
        has_coefficient, has_edge = reader.has('coefficient'), reader.has('edge_phase')
        if has_coefficient == has_edge:
            raise ConfigError(f"aberration.terms[{index}] needs exactly one of 'coefficient' or 'edge_phase'",
                              reader.line())
        if has_coefficient:
            coefficient = reader.take('coefficient', float)
        else:
            # radians reached at the lens half-extent
            coefficient = reader.take('edge_phase', float) / half_extent ** (px + (py or 0))
        term = MonomialTerm(px, py, coefficient)
    else:
        raise ConfigError(f"aberration.terms[{index}].kind must be 'zernike' or 'monomial', got '{kind}'",
                          reader.line('kind'))
    reader.finish()
    return term


def _read_aberration(reader: Optional[_Reader], lens: GridGeometry) -> Tuple[AberrationSpec, str]:
    half_extent = lens.extent / 2.0
    if reader is None:
        return AberrationSpec((), half_extent), 'full'
    radius = reader.take('aperture_radius', float, half_extent)
    project = reader.take('project', str, 'full')
    if project not in ('full', 'even', 'odd'):
        raise ConfigError(f"aberration.project must be 'full', 'even' or 'odd', got '{project}'",
                          reader.line('project'))
    items = reader.take('terms', list, [])
    line = reader.line('terms')
    terms = []
    for index, item in enumerate(items):
        terms.append(_read_term(item, index, getattr(item, 'line', line), half_extent))
    reader.finish()
    try:
        return AberrationSpec(tuple(terms), radius), project
    except ConfigError as exc:
        raise _rethrow(exc, line) from exc


def _read_object(reader: Optional[_Reader], base_dir: str) -> ObjectSpec:
    if reader is None:
        return ObjectSpec()
    name = reader.take('name', str, None)
    path = reader.take('path', str, None)
    if (name is None) == (path is None):
        raise ConfigError("object needs exactly one of 'name' or 'path'", reader.line())
    if name is not None and name not in STANDARD_OBJECTS:
        raise ConfigError(f"unknown object '{name}', expected one of {sorted(STANDARD_OBJECTS)}",
                          reader.line('name'))
    offset = reader.section.get('offset', 0.0)
    reader.used.add('offset')
    if isinstance(offset, list):
        offset = tuple(_convert(v, float, 'object.offset', reader.line('offset')) for v in offset)
    else:
        offset = _convert(offset, float, 'object.offset', reader.line('offset'))
    spec = ObjectSpec(
        name=name,
        path=os.path.join(base_dir, path) if path is not None else None,
        offset=offset,
        slit_width=reader.take('slit_width', float, None),
        separation=reader.take('separation', float, None),
        bar_width=reader.take('bar_width', float, None),
    )
    reader.finish()
    return spec


def _read_pump(reader: Optional[_Reader]) -> PumpModel:
    if reader is None:
        return PumpModel()
    kind = reader.take('kind', str, 'plane')
    width = reader.take('width', float, None)
    amplitude = reader.take('amplitude', float, 1.0)
    reader.finish()
    try:
        return PumpModel(kind, width, amplitude)
    except ConfigError as exc:
        raise _rethrow(exc, reader.line()) from exc


def load_scenario(path: str) -> ScenarioConfig:
    root = _parse(path)
    base_dir = os.path.dirname(os.path.abspath(path))

    seed = root.take('seed', int, None)
    layout = _read_layout(root.sub('layout'))
    grid = _read_grid(root.sub('grid'))
    aberration, project = _read_aberration(root.sub('aberration'), layout.lens_grid(grid))
    obj = _read_object(root.sub('object'), base_dir)
    pump = _read_pump(root.sub('pump'))

    engines = tuple(root.take('engines', list, list(settings.ENGINES)))
    engines_line = root.line('engines')
    for name in engines:
        if name not in settings.ENGINES:
            raise ConfigError(f"unknown engine '{name}', expected a subset of {list(settings.ENGINES)}", engines_line)
    if len(set(engines)) != len(engines):
        raise ConfigError("engines must not repeat", engines_line)

    classical = root.sub('classical')
    n_steer, max_points = None, settings.CLASSICAL_MAX_POINTS
    if classical is not None:
        n_steer = classical.take('n_steer', int, None)
        max_points = classical.take('max_points', int, max_points)
        classical.finish()
        if n_steer is not None and not 1 <= n_steer <= grid.samples:
            raise ConfigError(f"classical.n_steer must lie in [1, {grid.samples}], got {n_steer}",
                              classical.line('n_steer'))

    oracle = root.sub('oracle')
    max_samples, far_field = settings.ORACLE_MAX_SAMPLES, True
    if oracle is not None:
        max_samples = oracle.take('max_samples', int, max_samples)
        far_field = oracle.take('far_field', bool, True)
        oracle.finish()

    baseline = root.sub('baseline')
    oversample, illumination = settings.BASELINE_OVERSAMPLE, 'plane'
    if baseline is not None:
        oversample = baseline.take('oversample', int, oversample)
        illumination = baseline.take('illumination', str, illumination)
        baseline.finish()
        if oversample < 1:
            raise ConfigError(f"baseline.oversample must be >= 1, got {oversample}", baseline.line('oversample'))
        if illumination not in ('plane', 'pump'):
            raise ConfigError(f"baseline.illumination must be 'plane' or 'pump', got '{illumination}'",
                              baseline.line('illumination'))

    output = root.sub('output')
    directory = None
    if output is not None:
        directory = output.take('directory', str, None)
        output.finish()
        if directory is not None and not os.path.isabs(directory):
            directory = os.path.join(base_dir, directory)
    root.finish()

    if not root.has('engines'):
        # the default engine list only holds engines whose guards admit this grid
        if grid.dims != 1 or grid.samples > max_samples:
            engines = tuple(name for name in engines if name != 'ghost-oracle')
        if grid.samples ** grid.dims > max_points:
            engines = tuple(name for name in engines if name != 'classical')
    if 'ghost-oracle' in engines:
        if grid.dims != 1:
            raise ConfigError("ghost-oracle is 1D only (2D needs a six-dimensional quadrature); "
                              "set grid.dims: 1 or drop ghost-oracle", engines_line)
        if grid.samples > max_samples:
            raise ConfigError(f"ghost-oracle supports at most {max_samples} samples, grid has {grid.samples}",
                              engines_line)

    config = ScenarioConfig(settings.SCHEMA_VERSION, layout, grid, aberration, project, obj, pump, engines,
                            n_steer, max_points, max_samples, far_field, oversample, illumination, directory, seed)
    logger.debug(f"Loaded scenario {path}: dims={grid.dims} N={grid.samples} engines={list(engines)}")
    return config


@dataclass(frozen=True)
class NoiseConfig:
    schema_version: int
    noise: NoiseSettings
    output: Optional[str] = None
    seed: Optional[int] = None


def load_noise_config(path: str) -> NoiseConfig:
    root = _parse(path)
    base_dir = os.path.dirname(os.path.abspath(path))
    seed = root.take('seed', int, None)

    reader = root.sub('noise')
    values: Dict[str, Any] = {}
    if reader is not None:
        ladder = reader.take('ladder', list, None)
        if ladder is not None:
            values['ladder'] = tuple(int(_convert(n, float, 'noise.ladder', reader.line('ladder'))) for n in ladder)
        for key, kind in (('replicates', int), ('correlation', float), ('signal_std', float),
                          ('signal_mean', float), ('dark_mean', float), ('jackknife_blocks', int)):
            value = reader.take(key, kind, None)
            if value is not None:
                values[key] = value
        dark = reader.section.get('dark_std')
        reader.used.add('dark_std')
        if dark is not None:
            dark = dark if isinstance(dark, list) else [dark, dark]
            values['dark_std'] = tuple(_convert(v, float, 'noise.dark_std', reader.line('dark_std')) for v in dark)
        reader.finish()
        if 'signal_std' in values and values['signal_std'] < 0:
            raise ConfigError("noise.signal_std must be non-negative", reader.line('signal_std'))
        if any(v < 0 for v in values.get('dark_std', ())):
            raise ConfigError("noise.dark_std must be non-negative", reader.line('dark_std'))
        if not -1.0 <= values.get('correlation', 0.0) <= 1.0:
            raise ConfigError("noise.correlation must lie in [-1, 1]", reader.line('correlation'))

    output = root.sub('output')
    directory = None
    if output is not None:
        directory = output.take('directory', str, None)
        output.finish()
        if directory is not None and not os.path.isabs(directory):
            directory = os.path.join(base_dir, directory)
    root.finish()

    try:
        noise = NoiseSettings(**values, seed=settings.SEED if seed is None else seed)
    except ConfigError as exc:
        raise _rethrow(exc, reader.line() if reader is not None else None) from exc
    return NoiseConfig(settings.SCHEMA_VERSION, noise, directory, seed)
