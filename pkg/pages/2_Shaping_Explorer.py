import pandas as pd
import streamlit as st

from utils.logger import app_logger as logger
from utils.mapping import QamConstellation, build_frame, pair_pmf
from utils.metrics import empirical_pair_matrix, frame_metrics
from utils.shaping import (
    AmplitudeAlphabet,
    composition_from_pmf,
    entropy_bits,
    input_bit_length,
    num_sequences,
    rate_loss,
)

st.set_page_config(page_title="Shaping Explorer", page_icon="🎲", layout="wide")

DEFAULT_PMF = "0.4, 0.3, 0.2, 0.1"
SAMPLE_SYMBOLS = 21600


def parse_pmf(text: str) -> AmplitudeAlphabet:
    values = [float(v) for v in text.replace(';', ',').split(',') if v.strip()]
    return AmplitudeAlphabet.ask(values)


def composition_table(alphabet: AmplitudeAlphabet, n: int) -> pd.DataFrame:
    c = composition_from_pmf(alphabet, n)
    return pd.DataFrame({
        'amplitude': alphabet.amplitudes,
        'target_p': alphabet.target_pmf,
        'count': c.counts,
        'realized_p': [count / n for count in c.counts],
    })


def pair_table(matrix, alphabet: AmplitudeAlphabet) -> pd.DataFrame:
    labels = [f"{a:g}" for a in alphabet.amplitudes]
    return pd.DataFrame(matrix, index=[f"|I|={v}" for v in labels], columns=[f"|Q|={v}" for v in labels])


@st.cache_data
def sample_metrics(pmf_text: str, n: int, pairing: str, seed: int):
    alphabet = parse_pmf(pmf_text)
    frame = build_frame(alphabet, n, pairing, SAMPLE_SYMBOLS, False, seed=seed)
    constellation = QamConstellation.from_alphabet(alphabet)
    report = frame_metrics(frame, constellation)
    return report.to_dict(), empirical_pair_matrix(frame, constellation)


def main():
    st.title("Shaping Explorer")
    st.markdown("Composition, rate loss and amplitude-pair statistics of one CCDM block length.")

    with st.sidebar:
        st.header("Parameters")
        pmf_text = st.text_input("One-sided target PMF", DEFAULT_PMF)
        n = int(st.number_input("Block length n", min_value=2, max_value=10000, value=10, step=2))
        pairing = st.selectbox("Pairing", options=['intra', 'inter'])
        seed = int(st.number_input("Seed", min_value=0, value=0, step=1))

    try:
        alphabet = parse_pmf(pmf_text)
        c = composition_from_pmf(alphabet, n)
    except ValueError as e:
        logger.info(f"Rejected shaping parameters: {e}")
        st.error(f"Invalid parameters: {e}")
        st.stop()
        return
    if pairing == 'intra' and n % 2:
        st.error("Intra pairing needs an even block length.")
        st.stop()
        return

    st.header("Composition")
    st.dataframe(composition_table(alphabet, n))
    st.dataframe(pd.DataFrame([{
        'entropy_bits': entropy_bits(alphabet),
        'codewords': str(num_sequences(c)),
        'input_bits_k': input_bit_length(c),
        'rate_bits_per_amplitude': input_bit_length(c) / n,
        'rate_loss_bits': rate_loss(c, alphabet),
    }]))

    st.header("Amplitude pairs per quadrant")
    st.subheader("Expected over all arrangements")
    st.dataframe(pair_table(pair_pmf(c, pairing), alphabet))

    report, empirical = sample_metrics(pmf_text, n, pairing, seed)
    st.subheader(f"Empirical from {SAMPLE_SYMBOLS} symbols per polarization")
    st.dataframe(pair_table(empirical, alphabet))

    st.header("Sequence metrics")
    st.dataframe(pd.DataFrame([report]))


main()
