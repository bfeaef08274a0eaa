"""
Fade-in reverberation from coupled-room statistics
==================================================

A receiver in a neighbouring room (no line of sight) hears the convolution
of both rooms' decaying-noise responses.  The resulting envelope first
rises, peaks, and only then decays: the fade-in.  This script draws an
ensemble of simulated room-to-room responses and compares their RMS
envelope against the closed-form prediction.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import commonslope as cs

OUT = __import__("pathlib").Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

fs = 16000
seconds = 2.0
chain = cs.RoomChain(
    decay_rates=(20.0, 5.0),  # energy decay rates in 1/s: fast room, slow room
    length=int(fs * seconds),
    sample_rate=fs,
    seed=42,
)

# One realization, to look at.
rir = cs.chain_response(chain)
t = np.arange(len(rir.samples)) / fs

# Ensemble RMS envelope over many independent realizations.
window = int(0.005 * fs)
measured = cs.ensemble_rms_envelope(chain, n_realizations=400, window_len=window)
centers = (np.arange(len(measured)) + 0.5) * window / fs

# Closed-form oracle: the mean-square envelope is the difference of
# exponentials (partial fractions), scaled by the discrete-time factor.
sigma = cs.analytic_envelope(chain.decay_rates, centers)
scale = (20.0 - 5.0) / (np.exp(-5.0 / fs) - np.exp(-20.0 / fs))
predicted = np.sqrt(sigma * scale)

t_peak = np.log(20.0 / 5.0) / (20.0 - 5.0)

fig, axes = plt.subplots(1, 2, figsize=(11, 4))
axes[0].plot(t, rir.samples, lw=0.3, color="tab:gray")
axes[0].set_title("One room-to-room realization")
axes[0].set_xlabel("time (s)")
axes[0].set_ylabel("amplitude")

axes[1].plot(centers, measured, label="ensemble RMS envelope (400 draws)")
axes[1].plot(centers, predicted, "--", label="closed-form prediction")
axes[1].axvline(t_peak, color="k", lw=0.8, ls=":", label=f"predicted peak {t_peak:.3f} s")
axes[1].set_yscale("log")
axes[1].set_title("Fade-in: envelope rises before it decays")
axes[1].set_xlabel("time (s)")
axes[1].legend()
fig.tight_layout()
fig.savefig(OUT / "fade_in_statistics.png", dpi=120)
print(f"peak of measured envelope at {centers[np.argmax(measured)]:.3f} s "
      f"(prediction {t_peak:.3f} s)")
print(f"wrote {OUT / 'fade_in_statistics.png'}")
