import glob
import os

import pandas as pd
import streamlit as st

from utils.config import SIM_OUTPUT_DIR
from utils.harness import METRIC_COLUMNS, read_sweep_csv, summary_table
from utils.logger import app_logger as logger

st.set_page_config(page_title="Sweep Results", page_icon="📈", layout="wide")

METRIC_LABELS = {
    'snr_db': "Effective SNR [dB]",
    'kl_bits': "KL divergence [bit]",
    'kurtosis': "2D kurtosis",
    'run_ratio': "Run ratio",
    'run_ratio_abs': "Run ratio of |x|",
    'run_ratio_arg': "Run ratio of arg(x)",
}


@st.cache_data
def load_results(path: str) -> pd.DataFrame:
    return read_sweep_csv(path)


def list_result_files(directory: str):
    return sorted(glob.glob(os.path.join(directory, '*.csv')))


def main():
    st.title("Sweep Results")
    st.markdown("Aggregated Monte-Carlo results per block length, pairing and interleaving.")

    files = list_result_files(SIM_OUTPUT_DIR)
    if not files:
        logger.warning(f"No result files in {SIM_OUTPUT_DIR}")
        st.warning(f"No CSV files found in `{SIM_OUTPUT_DIR}`.")
        st.info("Run `ccdm-sim sweep --scale desk` to produce one.")
        st.stop()
        return

    selected = st.selectbox("Results file", options=files)
    if not selected:
        return

    try:
        table = load_results(selected)
    except (OSError, ValueError) as e:
        logger.error(f"Failed to read {selected}: {e}")
        st.error(f"Could not read {selected}: {e}")
        return

    missing = {'aggregate', 'pairing', 'interleaved', 'n'} - set(table.columns)
    if missing:
        st.error(f"{selected} is not a sweep result file (missing columns: {', '.join(sorted(missing))})")
        return

    failed = table[table['status'] == 'failed'] if 'status' in table.columns else table.iloc[0:0]
    if not failed.empty:
        st.warning(f"{len(failed)} run(s) failed and are excluded from the aggregates.")

    metric = st.selectbox(
        "Metric",
        options=METRIC_COLUMNS,
        format_func=lambda m: METRIC_LABELS.get(m, m),
    )
    st.header(METRIC_LABELS.get(metric, metric))
    summary = summary_table(table, metric)
    if summary.empty:
        st.info("The file has no aggregate rows.")
    else:
        st.dataframe(summary)

    agg = table[table['aggregate'] == 1]
    if {'ci_low_db', 'ci_high_db'} <= set(agg.columns) and not agg.empty:
        st.subheader("SNR 95% confidence intervals")
        st.dataframe(agg[['n', 'pairing', 'interleaved', 'snr_db', 'ci_low_db', 'ci_high_db']])

    with st.expander("Per-run rows"):
        st.dataframe(table[table['aggregate'] == 0])


main()
