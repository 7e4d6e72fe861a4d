import pytest

from qeasplit.bao import from_concrete
from qeasplit.setalg import BaseSpec, generate, product_R
from qeasplit.splitting import SplitSpec, split


class Tiny:
    """d = 3, blocks (2, 2, 2), m = 2, n = 2, k = 1."""

    def __init__(self, sizes=(2, 2, 2), m=2, n=2):
        self.base = BaseSpec.from_sizes(sizes)
        self.space = self.base.space()
        self.R = product_R(self.base)
        self.A = generate(self.space, n, [self.R])
        self.B = from_concrete(self.A)
        self.m, self.n = m, n
        self.S = split(SplitSpec.from_concrete(self.A, self.R, m, n, base=self.B))

    def split_with(self, m, n):
        return split(SplitSpec.from_concrete(self.A, self.R, m, n, base=self.B))


@pytest.fixture(scope="session")
def tiny():
    return Tiny()


@pytest.fixture(scope="session")
def wide():
    """Blocks (2, 3, 3): block 0 has m points, the others m + 1."""
    return Tiny((2, 3, 3))
