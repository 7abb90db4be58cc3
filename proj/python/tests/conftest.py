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

import pytest

import tilescout


@pytest.fixture(scope="session")
def parquet_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("parquet_corpus")
    manifest = tilescout.synth_corpus(out, cells=300, seed=11, format="parquet",
                                      models=["dinov2", "farslip"], row_group_size=64)
    return out, manifest


@pytest.fixture(scope="session")
def eesh1_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("eesh1_corpus")
    manifest = tilescout.synth_corpus(out, cells=800, seed=3)
    return out, manifest
