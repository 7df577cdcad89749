"""XML plumbing shared by the emitters: namespaces, a canonical
serializer, and the OpenMath object <-> XML mapping.

The canonical form is byte-stable: attributes sorted by name, fixed
namespace prefixes, two-space indentation for element-only content, and
verbatim text for mixed content.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from .errors import EmitError
from .content import OMA, OMI, OMS, OMV, OMObject

OMDOC_NS = "http://omdoc.org/ns"
OM_NS = "http://www.openmath.org/OpenMath"
MATHML_NS = "http://www.w3.org/1998/Math/MathML"
XHTML_NS = "http://www.w3.org/1999/xhtml"
OWL_NS = "http://www.w3.org/2002/07/owl#"
XML_NS = "http://www.w3.org/XML/1998/namespace"

XML_ID = f"{{{XML_NS}}}id"

# Namespaces serialized with a prefix; all others become the default
# namespace of their subtree (redeclared where it changes).
PREFIXED = {MATHML_NS: "m"}


def omdoc(tag: str) -> str:
    return f"{{{OMDOC_NS}}}{tag}"


def om(tag: str) -> str:
    return f"{{{OM_NS}}}{tag}"


def m(tag: str) -> str:
    return f"{{{MATHML_NS}}}{tag}"


def xh(tag: str) -> str:
    return f"{{{XHTML_NS}}}{tag}"


def owl(tag: str) -> str:
    return f"{{{OWL_NS}}}{tag}"


def split_tag(tag: str) -> tuple[str, str]:
    if tag.startswith("{"):
        ns, _, local = tag[1:].partition("}")
        return ns, local
    return "", tag


def local_name(tag: str) -> str:
    return split_tag(tag)[1]


def escape_text(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def escape_attr(s: str) -> str:
    return (
        s.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _used_prefixes(root: ET.Element) -> list[str]:
    used: set[str] = set()
    for el in root.iter():
        ns, _ = split_tag(el.tag)
        if ns in PREFIXED:
            used.add(ns)
    return sorted(used)


def _attr_name(name: str) -> str:
    ns, local = split_tag(name)
    if not ns:
        return local
    if ns == XML_NS:
        return f"xml:{local}"
    if ns in PREFIXED:
        return f"{PREFIXED[ns]}:{local}"
    raise EmitError(f"attribute in unsupported namespace: {name}")


def canonical_bytes(root: ET.Element, xml_decl: bool = True) -> bytes:
    """Serialize an element tree into its canonical byte form."""
    out: list[str] = []
    if xml_decl:
        out.append('<?xml version="1.0" encoding="UTF-8"?>\n')
    extra_root_decls = {}
    for ns in _used_prefixes(root):
        extra_root_decls[f"xmlns:{PREFIXED[ns]}"] = ns
    _emit(root, "", 0, out, extra_root_decls)
    out.append("\n")
    return "".join(out).encode("utf-8")


def _is_mixed(el: ET.Element) -> bool:
    if el.text is not None and el.text.strip():
        return True
    return any(child.tail is not None and child.tail.strip() for child in el)


def _emit(
    el: ET.Element,
    inherited_default: str,
    depth: int,
    out: list[str],
    extra_decls: dict | None = None,
) -> None:
    ns, local = split_tag(el.tag)
    if ns in PREFIXED:
        name = f"{PREFIXED[ns]}:{local}"
        child_default = inherited_default
        own_decl: dict[str, str] = {}
    else:
        name = local
        child_default = ns
        own_decl = {} if ns == inherited_default else {"xmlns": ns} if ns else {}

    attrs: dict[str, str] = dict(own_decl)
    if extra_decls:
        attrs.update(extra_decls)
    for aname, avalue in el.attrib.items():
        attrs[_attr_name(aname)] = avalue

    parts = [f"<{name}"]
    for aname in sorted(attrs):
        parts.append(f' {aname}="{escape_attr(attrs[aname])}"')
    open_tag = "".join(parts)

    children = list(el)
    if not children and (el.text is None or el.text == ""):
        out.append(open_tag + "/>")
        return
    if _is_mixed(el) or not children:
        out.append(open_tag + ">")
        if el.text:
            out.append(escape_text(el.text))
        for child in children:
            _emit(child, child_default, depth + 1, out)
            if child.tail:
                out.append(escape_text(child.tail))
        out.append(f"</{name}>")
        return
    # element-only content: indent
    out.append(open_tag + ">")
    pad = "\n" + "  " * (depth + 1)
    for child in children:
        out.append(pad)
        _emit(child, child_default, depth + 1, out)
    out.append("\n" + "  " * depth + f"</{name}>")


def parse_xml(data: bytes | str) -> ET.Element:
    if isinstance(data, bytes):
        return ET.fromstring(data)
    return ET.fromstring(data.encode("utf-8"))


# ── OpenMath <-> XML ────────────────────────────────────────────────


def om_to_xml(obj: OMObject, id_for=None, path: tuple = ()) -> ET.Element:
    """Build the OpenMath element for a content tree.

    ``id_for(path)`` may supply an ``id`` attribute per node occurrence.
    """
    if isinstance(obj, OMS):
        el = ET.Element(om("OMS"), {"cd": obj.cd, "name": obj.name})
    elif isinstance(obj, OMV):
        el = ET.Element(om("OMV"), {"name": obj.name})
    elif isinstance(obj, OMI):
        el = ET.Element(om("OMI"))
        el.text = str(obj.value)
    elif isinstance(obj, OMA):
        el = ET.Element(om("OMA"))
        el.append(om_to_xml(obj.head, id_for, path + (0,)))
        for i, arg in enumerate(obj.args, start=1):
            el.append(om_to_xml(arg, id_for, path + (i,)))
    else:
        raise EmitError(f"not an OpenMath object: {obj!r}")
    if id_for is not None:
        el.set("id", id_for(path))
    return el


def omobj_element(obj: OMObject, id_for=None) -> ET.Element:
    wrapper = ET.Element(om("OMOBJ"))
    wrapper.append(om_to_xml(obj, id_for))
    return wrapper


def om_from_xml(el: ET.Element) -> OMObject:
    """Parse an OpenMath element (or an OMOBJ wrapper) back into a tree."""
    local = local_name(el.tag)
    if local == "OMOBJ":
        children = list(el)
        if len(children) != 1:
            raise EmitError("OMOBJ must wrap exactly one object")
        return om_from_xml(children[0])
    if local == "OMS":
        cd = el.get("cd")
        name = el.get("name")
        if not cd or not name:
            raise EmitError("OMS needs cd and name attributes")
        return OMS(cd, name)
    if local == "OMV":
        name = el.get("name")
        if not name:
            raise EmitError("OMV needs a name attribute")
        return OMV(name)
    if local == "OMI":
        try:
            return OMI(int((el.text or "").strip()))
        except ValueError as exc:
            raise EmitError(f"bad integer in OMI: {el.text!r}") from exc
    if local == "OMA":
        children = [om_from_xml(c) for c in el]
        if len(children) < 2:
            raise EmitError("OMA needs a head and at least one argument")
        return OMA(children[0], tuple(children[1:]))
    raise EmitError(f"unsupported OpenMath element <{local}>")
