"""Block-wise image encryption and ViT patch-embedding adaptation."""

from ._core import (
    PatchcryptError,
    PatchEmbedding,
    SecretKey,
    adapt_archive,
    canonicalize_archive,
    decrypt_image,
    derive_seed,
    encrypt_image,
    generate_permutation,
    inspect_archive,
    invert_permutation,
    read_ppm,
    segmentation_metrics,
    verify_equivariance,
    write_ppm,
)

__all__ = [
    "PatchcryptError",
    "PatchEmbedding",
    "SecretKey",
    "adapt_archive",
    "canonicalize_archive",
    "decrypt_image",
    "derive_seed",
    "encrypt_image",
    "generate_permutation",
    "inspect_archive",
    "invert_permutation",
    "read_ppm",
    "segmentation_metrics",
    "verify_equivariance",
    "write_ppm",
]
