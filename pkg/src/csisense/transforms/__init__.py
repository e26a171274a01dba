"""Time-frequency transforms, velocity estimation and MiniRocket features."""
from .minirocket import MiniRocketModel, minirocket_fit, minirocket_transform, ridge_classify_fit, ridge_predict
from .music import VelocityGrid, dfs, music_velocity
from .spectral import Spectrum, fft, fftfreq, ifft, spectrum, stft
from .wavelet import WaveletCoeffs, dwt, idwt
