# Numerical lab for Hellinger-Kantorovich gradient flows

__version__ = "0.1.0"
