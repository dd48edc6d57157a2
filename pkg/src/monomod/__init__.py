"""Workbench for the monotonic modal logics MN, MNF, MNP, MNPF, MND, MNDF."""

__version__ = "0.1.0"
