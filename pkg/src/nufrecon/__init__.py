"""Edge-adaptive l2 reconstruction of piecewise-smooth functions from
non-uniform Fourier samples, with reweighted-l1 baselines."""

__version__ = "0.1.0"
