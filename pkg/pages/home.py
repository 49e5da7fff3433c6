import streamlit as st

from utils.config import SIM_OUTPUT_DIR
from utils.logger import app_logger as logger


def home_content():
    st.title("CCDM-Sim - Shaping and Nonlinear Interference Explorer")
    logger.info("Home page rendered")

    st.markdown(
        "Tables for constant-composition distribution matching (CCDM) block-length "
        "studies: how the DM block length and the amplitude pairing change the "
        "effective SNR of a shaped 64QAM channel in a multi-span WDM link."
    )

    col1, col2 = st.columns(2)
    with col1:
        st.markdown("### Pages")
        st.markdown("""
    - **Sweep Results**: effective SNR and sequence metrics from `ccdm-sim sweep` CSV files
    - **Shaping Explorer**: compositions, rate loss and pair statistics for one block length
    """)
    with col2:
        st.markdown("### Producing results")
        st.code(
            "ccdm-sim sweep --scale desk\n"
            "ccdm-sim shaping --n 10,100,1000 --out results/shaping.csv\n"
            "ccdm-sim validate",
            language="bash",
        )
        st.caption(f"Result files are read from `{SIM_OUTPUT_DIR}/`.")


home_content()
