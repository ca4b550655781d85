# Copyright 2026 The trialpack Authors
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

"""Python access to the trialpack core."""

import json

from . import _trialpack
from ._trialpack import (  # noqa: F401
    ConfigError,
    ContractError,
    Error,
    ShapeError,
    UnsupportedOperation,
    causal_pairs,
    closed_form_coverage,
    confidence_weighted,
    cross_refine,
    mean_logits,
    retained_count,
    theoretical_costs,
)


def _dump(config):
    if config is None:
        return ""
    if isinstance(config, str):
        return config
    return json.dumps(config)


def default_config():
    return json.loads(_trialpack.default_config_json())


def config_hash(config=None):
    return _trialpack.config_hash(_dump(config))


def run(config=None):
    """Runs one experiment and returns the report as a dict."""
    return json.loads(_trialpack.run_json(_dump(config)))


def sweep(axis, values=(), config=None, fmt="json"):
    if fmt == "csv":
        return _trialpack.sweep_csv(axis, list(values), _dump(config))
    return json.loads(_trialpack.sweep_json(axis, list(values), _dump(config)))


def coverage(total_frames, frames, trials, draws=10000, seed=0):
    return json.loads(_trialpack.coverage_json(total_frames, frames, trials, draws, seed))
