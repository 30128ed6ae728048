"""Parser for the line-oriented network description format.

Example::

    # cascade with gain
    [component cav]
    type = linear_cavity
    omega = 1.0
    gamma = 0.2

    [component amp]
    type = amplifier
    gain = 2

    [component kerr]
    type = kerr_cavity
    omega_a = 1.0
    chi = 0.01
    gamma = 0.2

    [network]
    chain = cav -> amp -> kerr -> cav

``chain`` lists stages in the order the signal traverses them;
``parallel = a | b`` places components side by side.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import DuplicateName, MissingParameter, SpecParseError, UnknownComponentType
from .model import amplifier, cavity, kerr_cavity, optomech, rotation_splitter
from .network import Leaf, NetworkExpr, chain, parallel

# type -> (required parameters, optional parameters with defaults, factory)
COMPONENT_TYPES = {
    "kerr_cavity": (
        ("omega_a", "chi", "gamma"),
        {"truncation_degree": 3},
        lambda p: kerr_cavity(p["omega_a"], p["chi"], p["gamma"], int(p["truncation_degree"])),
    ),
    "linear_cavity": (("omega", "gamma"), {}, lambda p: cavity(p["omega"], p["gamma"])),
    "optomech": (
        ("omega_a", "omega_b", "g", "gamma_a", "gamma_b"),
        {"truncation_degree": 3},
        lambda p: optomech(
            p["omega_a"], p["omega_b"], p["g"], p["gamma_a"], p["gamma_b"], int(p["truncation_degree"])
        ),
    ),
    "amplifier": (("gain",), {}, lambda p: amplifier(p["gain"])),
    "beam_splitter": (("theta",), {}, lambda p: rotation_splitter(p["theta"])),
}

_HEADER = re.compile(r"^\[\s*(component\s+(?P<name>[A-Za-z_][\w.-]*)|network)\s*\]$")
_NAME = re.compile(r"^[A-Za-z_][\w.-]*$")


@dataclass(frozen=True)
class ComponentDef:
    name: str
    type: str
    params: dict
    lineno: int
    component: object = field(compare=False, repr=False, default=None)


@dataclass(frozen=True)
class SpecFile:
    components: dict
    network: NetworkExpr
    network_line: int | None = None

    def component(self, name: str | None = None):
        """Look up a component; ``None`` selects the only one."""
        if name is None:
            if len(self.components) != 1:
                raise KeyError(f"spec defines {len(self.components)} components; choose one of {sorted(self.components)}")
            name = next(iter(self.components))
        if name not in self.components:
            raise KeyError(f"no component named {name!r}; defined: {sorted(self.components)}")
        return self.components[name]


def _number(text: str, key: str, lineno: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise SpecParseError(f"{key} = {text!r} is not a number", lineno) from None
    if not math.isfinite(value):
        raise SpecParseError(f"{key} must be finite, got {text}", lineno)
    return value


def _names(text: str, sep: str, lineno: int) -> list[str]:
    names = [t.strip() for t in text.split(sep)]
    for n in names:
        if not _NAME.match(n):
            raise SpecParseError(f"bad component name {n!r} in network expression", lineno)
    return names


def parse_spec(text: str) -> SpecFile:
    """Parse a spec file; errors carry the offending line number."""
    sections: list = []  # (kind, name, lineno, entries)
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            m = _HEADER.match(line)
            if not m:
                raise SpecParseError(f"bad section header {line!r}", lineno)
            kind = "network" if m.group("name") is None else "component"
            current = (kind, m.group("name"), lineno, [])
            sections.append(current)
            continue
        if "=" not in line:
            raise SpecParseError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise SpecParseError("entry outside of any section", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise SpecParseError(f"empty key or value in {line!r}", lineno)
        if any(k == key for k, _, _ in current[3]):
            raise DuplicateName(f"key {key!r} given twice", lineno)
        current[3].append((key, value, lineno))

    components: dict = {}
    network_sections = []
    for kind, name, lineno, entries in sections:
        if kind == "network":
            network_sections.append((lineno, entries))
            continue
        if name in components:
            raise DuplicateName(f"component {name!r} already defined", lineno)
        components[name] = _build_component(name, lineno, entries)

    if len(network_sections) > 1:
        raise DuplicateName("more than one [network] section", network_sections[1][0])
    if not components:
        raise SpecParseError("no components defined")

    if not network_sections:
        if len(components) != 1:
            raise MissingParameter("several components but no [network] section")
        return SpecFile(components, Leaf(next(iter(components))), None)

    lineno, entries = network_sections[0]
    if len(entries) != 1:
        raise SpecParseError("[network] needs exactly one 'chain' or 'parallel' line", lineno)
    key, value, eline = entries[0]
    if key == "chain":
        names = _names(value, "->", eline)
        expr = chain(*names)
    elif key == "parallel":
        names = _names(value, "|", eline)
        expr = parallel(*names)
    else:
        raise SpecParseError(f"unknown network key {key!r} (expected chain or parallel)", eline)
    for n in names:
        if n not in components:
            raise SpecParseError(f"network references undefined component {n!r}", eline)
    return SpecFile(components, expr, eline)


def _build_component(name, lineno, entries) -> ComponentDef:
    given = {k: (v, ln) for k, v, ln in entries}
    if "type" not in given:
        raise MissingParameter(f"component {name!r} has no type", lineno)
    ctype, tline = given.pop("type")
    if ctype not in COMPONENT_TYPES:
        raise UnknownComponentType(
            f"unknown component type {ctype!r}; known: {', '.join(sorted(COMPONENT_TYPES))}", tline
        )
    required, optional, factory = COMPONENT_TYPES[ctype]
    params = dict(optional)
    for key, (value, ln) in given.items():
        if key not in required and key not in optional:
            raise SpecParseError(f"unknown key {key!r} for {ctype}", ln)
        params[key] = _number(value, key, ln)
    missing = [k for k in required if k not in params]
    if missing:
        raise MissingParameter(f"component {name!r} ({ctype}) lacks {', '.join(missing)}", lineno)
    try:
        obj = factory(params)
    except ValueError as exc:
        raise SpecParseError(f"component {name!r}: {exc}", lineno) from None
    return ComponentDef(name, ctype, params, lineno, obj)
