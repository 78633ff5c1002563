"""Regenerate the MFCC golden file with python_speech_features.

Run from the repo root: ``python tests/data/make_golden.py``.
Needs the ``golden`` extra (python_speech_features); the test suite only
reads the stored ``.npy`` file.
"""

from pathlib import Path

import numpy as np
from python_speech_features import mfcc

RATE = 16000
OUT = Path(__file__).with_name("sine1k_psf_cepstra.npy")


def sine_1k():
    t = np.arange(RATE) / RATE
    return np.round(10000 * np.sin(2 * np.pi * 1000 * t)).astype(np.int16)


def main():
    cep = mfcc(sine_1k(), samplerate=RATE, winlen=0.025, winstep=0.01, numcep=13,
               nfilt=23, nfft=512, preemph=0.97, ceplifter=0, appendEnergy=False,
               winfunc=np.hamming)
    # reference pads the tail; keep only frames that fit fully in the signal
    np.save(OUT, cep[:98, 1:13])


if __name__ == "__main__":
    main()
