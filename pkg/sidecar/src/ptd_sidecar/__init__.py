"""Model sidecar: generation and embedding endpoints for the pipeline."""

__version__ = "0.1.0"
