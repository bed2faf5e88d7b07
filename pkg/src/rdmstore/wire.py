"""XML wire format: lossless round trip between domain objects and elements.

The vocabulary is fixed; unknown element tags or attributes are
rejected. All documents are UTF-8.

Entity element::

    <Entity id kind name [description]>
      <Parent id [name]/>
      <Property ref [name] [type] [value] [unit] importance>
        <Item [value] [unit]/>...          (list values only)
      </Property>
      <Datatype [type] [unit] [low] [high]>
        <Default [type] [value] [unit]/>   (optional)
      </Datatype>
      <File path size checksum/>           (File entities only)
    </Entity>

A Property without a value attribute (and without Item children) holds
the Null value. Temporary ids inside transaction documents are negative
integers.
"""

from __future__ import annotations

import datetime as dt
import xml.etree.ElementTree as ET
from typing import Callable, Optional

from . import units
from .datamodel import (
    Datatype,
    Entity,
    EntityKind,
    EntityProperty,
    FileMeta,
    Importance,
    Ref,
    value_type_tag,
)
from .errors import UnitError, WireFormatError
from .units import Quantity

NameResolver = Callable[[int], Optional[str]]


def render_scalar(value: object) -> tuple[str, Optional[str]]:
    """Return (text, unit symbol or None) for a scalar value."""
    if isinstance(value, bool):
        return ("true" if value else "false", None)
    if isinstance(value, int):
        return (str(value), None)
    if isinstance(value, float):
        return (repr(value), None)
    if isinstance(value, Quantity):
        return (repr(value.magnitude), value.unit.symbol)
    if isinstance(value, (dt.datetime, dt.date)):
        return (value.isoformat(), None)
    if isinstance(value, Ref):
        return (str(value.target), None)
    if isinstance(value, str):
        return (value, None)
    raise WireFormatError(f"unsupported scalar {type(value).__name__}")


def parse_scalar(tag: str, text: str, unit: Optional[str]) -> object:
    try:
        if tag == "Integer":
            return int(text)
        if tag == "Double":
            return float(text)
        if tag == "Boolean":
            if text not in ("true", "false"):
                raise ValueError(text)
            return text == "true"
        if tag == "Quantity":
            u = units.DEFAULT_REGISTRY.get(unit) if unit else units.DIMENSIONLESS_UNIT
            return Quantity(float(text), u)
        if tag == "Datetime":
            return dt.datetime.fromisoformat(text)
        if tag == "Date":
            return dt.date.fromisoformat(text)
        if tag == "Reference":
            return Ref(int(text))
        if tag == "Text":
            return text
    except UnitError:
        raise
    except ValueError as exc:
        raise WireFormatError(f"bad {tag} value {text!r}") from exc
    raise WireFormatError(f"unknown value type {tag!r}")


def _check_attrs(elem: ET.Element, allowed: set[str]) -> None:
    extra = set(elem.keys()) - allowed
    if extra:
        raise WireFormatError(
            f"unknown attribute(s) {sorted(extra)} on <{elem.tag}>"
        )


def _require(elem: ET.Element, attr: str) -> str:
    v = elem.get(attr)
    if v is None:
        raise WireFormatError(f"<{elem.tag}> missing required attribute {attr!r}")
    return v


def _int_attr(elem: ET.Element, attr: str) -> int:
    try:
        return int(_require(elem, attr))
    except ValueError as exc:
        raise WireFormatError(f"<{elem.tag}> {attr} is not an integer") from exc


def property_to_xml(prop: EntityProperty, resolver: Optional[NameResolver] = None) -> ET.Element:
    el = ET.Element("Property", ref=str(prop.property_ref), importance=prop.importance.value)
    if resolver is not None:
        name = resolver(prop.property_ref)
        if name is not None:
            el.set("name", name)
    value = prop.value
    if isinstance(value, tuple):
        el.set("type", value_type_tag(value))
        for item in value:
            text, unit = render_scalar(item)
            item_el = ET.SubElement(el, "Item", value=text)
            if unit is not None:
                item_el.set("unit", unit)
    elif value is not None:
        el.set("type", value_type_tag(value))
        text, unit = render_scalar(value)
        el.set("value", text)
        if unit is not None:
            el.set("unit", unit)
    if prop.unit_override is not None:
        el.set("unit", prop.unit_override)
    return el


def property_from_xml(el: ET.Element) -> EntityProperty:
    _check_attrs(el, {"ref", "name", "type", "value", "unit", "importance"})
    ref = _int_attr(el, "ref")
    importance = Importance(_require(el, "importance"))
    tag = el.get("type")
    unit = el.get("unit")
    items = list(el)
    if tag is not None and tag.startswith("ListOf:"):
        elem_tag = tag.split(":", 1)[1]
        parsed = []
        for item in items:
            if item.tag != "Item":
                raise WireFormatError(f"unexpected <{item.tag}> inside <Property>")
            _check_attrs(item, {"value", "unit"})
            parsed.append(parse_scalar(elem_tag, _require(item, "value"), item.get("unit")))
        return EntityProperty(ref, tuple(parsed), importance)
    if items:
        raise WireFormatError("Item children only legal for list-typed properties")
    text = el.get("value")
    if text is None:
        return EntityProperty(ref, None, importance, unit_override=unit)
    if tag is None:
        raise WireFormatError("<Property> with a value needs a type attribute")
    value = parse_scalar(tag, text, unit)
    override = unit if not isinstance(value, Quantity) else None
    return EntityProperty(ref, value, importance, unit_override=override)


def datatype_to_xml(d: Datatype) -> ET.Element:
    el = ET.Element("Datatype")
    if d.type_tag is not None:
        el.set("type", d.type_tag)
    if d.unit is not None:
        el.set("unit", d.unit)
    if d.low is not None:
        el.set("low", repr(d.low))
    if d.high is not None:
        el.set("high", repr(d.high))
    if d.default is not None:
        text, unit = render_scalar(d.default)
        def_el = ET.SubElement(el, "Default", type=value_type_tag(d.default), value=text)
        if unit is not None:
            def_el.set("unit", unit)
    return el


def datatype_from_xml(el: ET.Element) -> Datatype:
    _check_attrs(el, {"type", "unit", "low", "high"})
    default = None
    for child in el:
        if child.tag != "Default":
            raise WireFormatError(f"unexpected <{child.tag}> inside <Datatype>")
        _check_attrs(child, {"type", "value", "unit"})
        default = parse_scalar(_require(child, "type"), _require(child, "value"), child.get("unit"))
    low = el.get("low")
    high = el.get("high")
    return Datatype(
        type_tag=el.get("type"),
        unit=el.get("unit"),
        low=float(low) if low is not None else None,
        high=float(high) if high is not None else None,
        default=default,
    )


def entity_to_xml(e: Entity, resolver: Optional[NameResolver] = None) -> ET.Element:
    el = ET.Element("Entity", id=str(e.id), kind=e.kind.value, name=e.name)
    if e.description is not None:
        el.set("description", e.description)
    for pid in e.parents:
        parent_el = ET.SubElement(el, "Parent", id=str(pid))
        if resolver is not None:
            name = resolver(pid)
            if name is not None:
                parent_el.set("name", name)
    for prop in e.properties:
        el.append(property_to_xml(prop, resolver))
    if e.datatype is not None:
        el.append(datatype_to_xml(e.datatype))
    if e.file_meta is not None:
        ET.SubElement(
            el,
            "File",
            path=e.file_meta.path,
            size=str(e.file_meta.size),
            checksum=e.file_meta.checksum,
        )
    return el


def entity_from_xml(el: ET.Element) -> Entity:
    if el.tag != "Entity":
        raise WireFormatError(f"expected <Entity>, got <{el.tag}>")
    _check_attrs(el, {"id", "kind", "name", "description"})
    try:
        kind = EntityKind(_require(el, "kind"))
    except ValueError as exc:
        raise WireFormatError(f"unknown entity kind {el.get('kind')!r}") from exc
    parents: list[int] = []
    props: list[EntityProperty] = []
    datatype = None
    file_meta = None
    for child in el:
        if child.tag == "Parent":
            _check_attrs(child, {"id", "name"})
            parents.append(_int_attr(child, "id"))
        elif child.tag == "Property":
            props.append(property_from_xml(child))
        elif child.tag == "Datatype":
            datatype = datatype_from_xml(child)
        elif child.tag == "File":
            _check_attrs(child, {"path", "size", "checksum"})
            file_meta = FileMeta(
                path=_require(child, "path"),
                size=_int_attr(child, "size"),
                checksum=_require(child, "checksum"),
            )
        else:
            raise WireFormatError(f"unexpected <{child.tag}> inside <Entity>")
    try:
        return Entity(
            id=_int_attr(el, "id"),
            kind=kind,
            name=_require(el, "name"),
            description=el.get("description"),
            parents=tuple(parents),
            properties=tuple(props),
            datatype=datatype,
            file_meta=file_meta,
        )
    except ValueError as exc:
        raise WireFormatError(str(exc)) from exc


def to_bytes(el: ET.Element) -> bytes:
    return ET.tostring(el, encoding="utf-8", xml_declaration=False)


def from_bytes(data: bytes) -> ET.Element:
    try:
        return ET.fromstring(data)
    except ET.ParseError as exc:
        raise WireFormatError(f"XML parse error: {exc}") from exc
