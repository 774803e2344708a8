import itertools

from gpts.kernels import chi_gaussian, chi_linear, chi_mdp


def all_kernels(B, D):
    """Linear, two Gaussian widths and two discounts on a (B, D) tree."""
    return [
        chi_linear(B, D),
        chi_gaussian(B, D, 1.5),
        chi_gaussian(B, D, 3.0),
        chi_mdp(B, D, 0.3),
        chi_mdp(B, D, 0.7),
    ]


def paths(B, D):
    return list(itertools.product(range(B), repeat=D))
