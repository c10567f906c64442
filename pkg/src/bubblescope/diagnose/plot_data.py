"""Tab-separated curves behind the flagged windows of a report"""
import logging
from pathlib import Path
from typing import List, Union

import pandas as pd

from ..fitting.calibrate import model_curve
from ..fitting.functions import eval_exponential_log_price
from ..series.models import PriceSeries, log_prices, window
from ..utils.errors import OutputError
from ..utils.files import write_text_atomic
from .scan import BubbleReport

logger = logging.getLogger(__name__)

COLUMNS = ["time", "logp", "null_line", "model_curve"]


def plot_data_name(label: str, offset: int) -> str:
    return f"{label}_window_{offset:04d}.tsv"


def write_plot_data(report: BubbleReport, series: PriceSeries,
                    directory: Union[str, Path]) -> List[Path]:
    """
    Write one TSV per flagged window with the observed log price, the
    exponential null line and the flagged model's curve.

    Returns:
        Paths written, in window order
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(f"Cannot create plot-data directory {directory}: {e.strerror or e}")
    log_series = log_prices(series)

    written = []
    for diagnosis in report.flagged:
        fit = diagnosis.fit_for(diagnosis.flag_model)
        observed = window(log_series, diagnosis.t_start, diagnosis.t_end)
        frame = pd.DataFrame({
            "time": observed.t,
            "logp": observed.y,
            "null_line": eval_exponential_log_price(diagnosis.null.params, observed.t),
            "model_curve": model_curve(fit, observed.t),
        }, columns=COLUMNS)
        path = directory / plot_data_name(report.label, diagnosis.offset)
        write_text_atomic(path, frame.to_csv(sep="\t", index=False, lineterminator="\n"))
        written.append(path)

    logger.info("Wrote %d plot-data files to %s", len(written), directory)
    return written
