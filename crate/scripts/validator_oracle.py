"""Regenerates the expected result sets for crates/core/tests/data/validator.

Each NN_*_shapes.ttl / NN_*_data.ttl pair is validated with pySHACL and the
violated (source shape, focus node, component) triples are written, sorted,
to NN_*_expected.tsv. Blank-node focus nodes are written as "_:".
"""

import pathlib
import sys

from pyshacl import validate
from rdflib import BNode, Graph, Namespace

SH = Namespace("http://www.w3.org/ns/shacl#")


def term(node):
    return "_:" if isinstance(node, BNode) else str(node)


def main(root):
    for shapes_path in sorted(root.glob("*_shapes.ttl")):
        stem = shapes_path.name[: -len("_shapes.ttl")]
        data = Graph().parse(root / f"{stem}_data.ttl")
        shapes = Graph().parse(shapes_path)
        _, report, _ = validate(data, shacl_graph=shapes, inference="none")
        rows = set()
        for result in report.objects(None, SH.result):
            shape = report.value(result, SH.sourceShape)
            focus = report.value(result, SH.focusNode)
            component = report.value(result, SH.sourceConstraintComponent)
            rows.add((term(shape), term(focus), str(component).rsplit("#", 1)[1]))
        lines = ["\t".join(r) for r in sorted(rows)]
        (root / f"{stem}_expected.tsv").write_text("".join(l + "\n" for l in lines))
        print(f"{stem}: {len(lines)}")


if __name__ == "__main__":
    default = pathlib.Path(__file__).resolve().parent.parent / "crates/core/tests/data/validator"
    main(pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else default)
