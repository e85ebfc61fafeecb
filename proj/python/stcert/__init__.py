"""Python bindings for the second-thought certification core."""

from pathlib import Path as _Path

from ._stcert import (  # noqa: F401
    ClassifierBackend,
    Error,
    FakeClassifier,
    FakeSegmenter,
    SegmenterBackend,
    Taxonomy,
    adversarial_summary,
    apply_mask,
    certify,
    crop_resize,
    expand_box,
    make_classifier,
    make_segmenter,
    render_world,
    rle_decode,
    rle_encode,
    run_dataset,
    summarize,
    tight_bbox,
)

__version__ = "0.1.0"


def shipped_taxonomy_path():
    """Path of the bundled ImageNet taxonomy, when installed as a wheel."""
    return _Path(__file__).parent / "data" / "imagenet_taxonomy.json"
