# Copyright 2026 The tilescout Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Embedding search over a global tile grid."""

import json as _json

from . import _core
from ._core import (
    DEFAULT_MOCK_SEED,
    Error,
    cell_center,
    cell_of,
    float_to_half,
    fnv1a64,
    half_to_float,
    mock_location_encoder,
    mock_text_encoder,
    rows_total,
)

__all__ = [
    "DEFAULT_MOCK_SEED",
    "Corpus",
    "Error",
    "cell_center",
    "cell_of",
    "float_to_half",
    "fnv1a64",
    "half_to_float",
    "mock_location_encoder",
    "mock_text_encoder",
    "models",
    "rows_total",
    "synth_corpus",
    "verify_corpus",
]


def models():
    """The built-in model registry as a list of dicts."""
    return _json.loads(_core.models_json())


def synth_corpus(out, cells, seed=42, smooth=False, format="eesh1", models=(), row_group_size=1024):
    """Writes a synthetic corpus and returns its manifest."""
    return _json.loads(
        _core.synth_corpus(str(out), cells, seed, smooth, format, list(models), row_group_size)
    )


def verify_corpus(path):
    return _json.loads(_core.verify_corpus(str(path)))


class Corpus:
    """A corpus loaded into memory for querying."""

    def __init__(self, path, models=()):
        self._native = _core.Corpus(str(path), list(models))

    def info(self):
        return _json.loads(self._native.info_json())

    def query(self, model_id, *, text=None, cell_id=None, location=None, vector=None,
              k=5, fraction=0.025, location_mode="mock", render=False, width=1440, height=720):
        """Runs one query. Exactly one of text, cell_id, location, vector."""
        given = {
            "text": text is not None,
            "image_cell": cell_id is not None,
            "location": location is not None,
            "raw": vector is not None,
        }
        if sum(given.values()) != 1:
            raise ValueError("give exactly one of text, cell_id, location, vector")
        modality = next(m for m, on in given.items() if on)
        payload = {}
        if text is not None:
            payload["text"] = text
        elif cell_id is not None:
            payload["cell_id"] = cell_id
        elif location is not None:
            payload["lat"], payload["lon"] = location
        else:
            payload["vector"] = [float(x) for x in vector]
        request = {"model_id": model_id, "modality": modality, "payload": payload,
                   "k": k, "fraction": fraction}
        text_out, png = self._native.query_json(_json.dumps(request), location_mode, render,
                                                width, height)
        result = _json.loads(text_out)
        result["geojson"] = _json.loads(result["geojson"])
        result["map_png"] = png if render else None
        return result
