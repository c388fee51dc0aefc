"""Residue-disclosing LWE encryption for encrypted observer-based control."""

from .field import centered_lift, mod_inv, mod_reduce
from .linalg import ZqMatrix
from .lwe import Ciphertext, CiphertextKind, SecretKey, decrypt, encrypt, hom_matmul, keygen, make_rng
from .zero_dynamics import NormalForm, SystemZq, build_normal_form, relative_degree
from .encryptor import EncryptorSession, decrypt_mod, disclosed_residue, open_session

__version__ = "0.1.0"

__all__ = [
    "centered_lift", "mod_inv", "mod_reduce", "ZqMatrix",
    "Ciphertext", "CiphertextKind", "SecretKey", "decrypt", "encrypt", "hom_matmul", "keygen", "make_rng",
    "NormalForm", "SystemZq", "build_normal_form", "relative_degree",
    "EncryptorSession", "decrypt_mod", "disclosed_residue", "open_session",
]
