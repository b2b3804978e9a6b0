"""Python access to the interaction refinement toolkit."""

import pkgutil

# The compiled module lands in a separate build directory during development.
__path__ = pkgutil.extend_path(__path__, __name__)

from ._hoir import (  # noqa: E402
    FusionWeights,
    HoirError,
    clip_text_template,
    evaluate,
    fuse_scores,
    gradcheck,
    pair_distance,
    parse_binary_output,
    parse_score_output,
    render_common_sense,
    run_cli,
    select_keyframes,
    sigmoid,
    threshold_select,
    triplet_text,
)

__all__ = [
    "FusionWeights",
    "HoirError",
    "clip_text_template",
    "evaluate",
    "fuse_scores",
    "gradcheck",
    "pair_distance",
    "parse_binary_output",
    "parse_score_output",
    "render_common_sense",
    "run_cli",
    "select_keyframes",
    "sigmoid",
    "threshold_select",
    "triplet_text",
]
