"""
Posterior means and pointwise bands in function space
=====================================================

Runs the render command on the checked-in spec and writes one CSV and one
SVG per method to demos/out/.  Open the SVGs in a browser.
"""
from pathlib import Path

from distseq.experiments import cmd_render, load_spec

here = Path(__file__).parent
report = cmd_render(load_spec(here / "specs" / "render_reference.json"))
for path in report.write(here / "out"):
    print("wrote", path.relative_to(here))
