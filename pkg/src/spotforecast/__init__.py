"""Electricity spot-price forecasting: naive and Fourier baselines,
decomposition-based linear/ARMA/GARCH predictors, a mean-reverting
jump-diffusion Monte Carlo model, a feed-forward network and an averaging
hybrid, with a backtest harness and CLI."""

__version__ = "0.1.0"
