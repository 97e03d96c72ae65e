"""Synthetic plate generation: text patterns, template rendering, augmentation."""

from fairsplit.synthgen.augment import AugmentConfig, augment
from fairsplit.synthgen.batch import SynthRecord, augment_manifest, generate_batch
from fairsplit.synthgen.render import Template, bundled_templates_dir, load_registry, load_template, render_plate
from fairsplit.synthgen.text import PlatePattern, Slot, generate_plate_text

__all__ = [
    "AugmentConfig",
    "PlatePattern",
    "Slot",
    "SynthRecord",
    "Template",
    "augment",
    "augment_manifest",
    "bundled_templates_dir",
    "generate_batch",
    "generate_plate_text",
    "load_registry",
    "load_template",
    "render_plate",
]
