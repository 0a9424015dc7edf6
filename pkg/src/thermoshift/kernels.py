"""Kernel selection: compiled extension when built, pure python otherwise."""

try:
    from ._kernels import sample_path

    USING_COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    from ._fallback import sample_path

    USING_COMPILED = False

__all__ = ["sample_path", "USING_COMPILED"]
