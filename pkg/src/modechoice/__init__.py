"""Mode choice estimation: MNL and panel mixed logit, RP and joint RP-SP."""

__version__ = "0.1.0"
