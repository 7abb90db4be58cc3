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

"""Shards written by the native Parquet writer, read back with pyarrow."""

import hashlib
import math

import numpy as np
import pyarrow.parquet as pq

import tilescout
from test_prng import reference_text_encoder

DIMS = {m["id"]: m for m in tilescout.models()}


def expected_vector(seed, model, cell_id):
    raw = reference_text_encoder(seed, DIMS[model]["dim"], f"cell/{model}/{cell_id}")
    norm = math.sqrt(sum(float(x) * float(x) for x in raw))
    unit = np.array([float(x) / norm for x in raw], dtype=np.float32)
    return unit.astype(np.float16) if DIMS[model]["dtype"] == "float16" else unit


def test_pyarrow_reads_every_shard(parquet_corpus):
    out, manifest = parquet_corpus
    assert manifest["total_records"] == {"dinov2": 300, "farslip": 300}
    for shard in manifest["shards"]:
        path = out / shard["file"]
        assert hashlib.sha256(path.read_bytes()).hexdigest() == shard["checksum"]
        pf = pq.ParquetFile(path)
        assert pf.metadata.num_rows == shard["record_count"]
        assert pf.metadata.num_row_groups == len(shard["row_groups"])
        for i, rg in enumerate(shard["row_groups"]):
            assert pf.metadata.row_group(i).num_rows == rg["record_count"]
        names = pf.schema_arrow.names
        assert names == ["cell_row", "cell_col", "lat", "lon", "acquired_at", "source_product",
                         "embedding"]


def test_values_match_independent_derivation(parquet_corpus):
    out, manifest = parquet_corpus
    for shard in manifest["shards"]:
        model = shard["model_id"]
        table = pq.read_table(out / shard["file"]).to_pydict()
        keys = list(zip(table["cell_row"], table["cell_col"]))
        assert keys == sorted(keys)
        for i in range(0, len(keys), 37):
            cell_id = f"R{keys[i][0]}C{keys[i][1]}"
            lat, lon = tilescout.cell_center(cell_id)
            assert table["lat"][i] == lat and table["lon"][i] == lon
            assert table["source_product"][i] == f"SYNTH_{11:016x}_{cell_id}"
            got = np.array(table["embedding"][i], dtype=expected_vector(11, model, cell_id).dtype)
            assert len(got) == DIMS[model]["dim"]
            assert got.tobytes() == expected_vector(11, model, cell_id).tobytes(), cell_id


def test_verify_reports_clean_corpus(parquet_corpus):
    out, _ = parquet_corpus
    report = tilescout.verify_corpus(out)
    assert report["ok"] and report["records_checked"] == 600
