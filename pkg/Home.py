from dotenv import load_dotenv
load_dotenv(".env.local", override=False)

import streamlit as st

st.set_page_config(page_title="CCDM-Sim - Shaping and Nonlinear Interference Explorer")

pg = st.navigation(
    {
        "Explorer": [
            st.Page("pages/home.py", title="Home", default=True),
            st.Page("pages/1_Sweep_Results.py", title="Sweep Results", url_path="sweep"),
            st.Page("pages/2_Shaping_Explorer.py", title="Shaping Explorer", url_path="shaping"),
        ],
    }
)
pg.run()
