"""Fourier-truncated and heat-kernel predictions of the mean cost, side by side."""

from randmatch.field import fourier_cutoff_prediction, heat_cutoff_prediction

print(f"{'N':>10} {'fourier':>9} {'heat':>9} {'gap':>8} {'ratio':>7}")
for e in range(1, 9):
    N = 10 ** e
    f, h = fourier_cutoff_prediction(N), heat_cutoff_prediction(N)
    print(f"{N:>10} {f:9.4f} {h:9.4f} {f - h:8.4f} {f / h:7.3f}")
