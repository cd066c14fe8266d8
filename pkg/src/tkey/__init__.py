"""Time-based one-time passwords from time-tagged hash chains."""

from .chain import ChainValue, HashCounter, Params, chain_tail, keygen, step_down, walk
from .checkpoints import ExponentialModel, make_plan
from .encoding import (
    base32_to_password, enrollment_to_uri, password_to_base32, password_to_words, uri_to_enrollment,
    words_to_password,
)
from .prover import Enrollment, PlanConfig, ProverState, gen_password, init, reposition
from .verifier import SkewPolicy, Verifier, VerifierCredential, enroll, verify

__version__ = "0.1.0"
