"""qtlab: exact desk-scale checks for quasi-tree metric constructions."""

__version__ = "0.1.0"

MODEL_TAGS = {
    "tree_model": "free-group-cayley-window",
    "cone_model": "apex-unit-edges",
    "piece_metric": "l1",
}
