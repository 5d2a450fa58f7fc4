"""IGMRF structure matrices, reference standard deviations and hyperprior scaling"""

__version__ = "0.1.0"
