"""
Pipeline orchestration and synthetic fixtures.
"""

from napselect.pipeline.runner import PipelineConfig, PipelineRunner, dump_json
from napselect.pipeline.fixtures import FixtureGenerator
