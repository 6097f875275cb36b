# ABOUTME: Main package initialization for mvpreg.
# ABOUTME: Exposes the version used in report headers and the CLI.

__version__ = "0.1.0"
