"""Progressive-resolution diffusion sampling on an analytic toy model."""
