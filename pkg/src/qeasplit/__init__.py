"""Finite set algebras, atom splitting and witnesses of non-representability."""

from .bao import FiniteBAO, Homomorphism, VerificationRecord, from_concrete, verify_bao, verify_hom
from .nondiag import EnlargedBase, lift, nondiag_representation
from .perm import Permutation, symmetric_group
from .setalg import BaseSpec, PowersetAlgebra, SeqSpace, SetElement, generate, product_R
from .splitting import (
    SplitSpec, embed_small, embed_split, equiv_blocks, real_partition, small_subalgebra, split, verify_split,
)
from .terms import Term, check_equation, check_quasi_equation, eval_term, parse_term, print_term
from .witness import refute_representation, search_representation, tau, verify_tau_zero

__all__ = [
    "BaseSpec", "EnlargedBase", "FiniteBAO", "Homomorphism", "Permutation", "PowersetAlgebra", "SeqSpace",
    "SetElement", "SplitSpec", "Term", "VerificationRecord", "check_equation", "check_quasi_equation",
    "embed_small", "embed_split", "equiv_blocks", "eval_term", "from_concrete", "generate", "lift",
    "nondiag_representation", "parse_term", "print_term", "product_R", "real_partition",
    "refute_representation", "search_representation", "small_subalgebra", "split", "symmetric_group", "tau",
    "verify_bao", "verify_hom", "verify_split", "verify_tau_zero",
]
