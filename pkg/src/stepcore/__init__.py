"""stepcore: removability analysis for model-generated reasoning chains."""

__version__ = "0.1.0"
