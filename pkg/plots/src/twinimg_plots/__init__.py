"""Publication-style figures from twinimg analysis outputs."""

__version__ = "0.1.0"

from .readers import CorrMapData, InputFormatError, read_corr_csv, read_report, read_snr_csv
from .render import render, render_corr_map, render_joint_slices, render_snr_curve
from .specs import PlotSpec, PlotSpecError, load_spec
