"""
Solver configuration.
"""
import enum

from pydantic import BaseModel, ConfigDict, Field

from discrete_barycenter.transport import TransportMethod

GIB = 1024 ** 3


class StartMethod(str, enum.Enum):
    GREEDY = 'greedy'
    TWO_APP = 'two_app'


class PairVariant(str, enum.Enum):
    """
    Which two measures are assigned to the pricing problem.
    """

    ANY = 'any'
    LARGE = 'large'
    SMALL = 'small'


class SolveConfig(BaseModel):
    """
    Options of one column generation run.

    ``tol`` is the stopping threshold on the pricing objective: the run
    converges once no column with reduced cost below ``-tol`` exists.
    ``memory_cap`` bounds the bytes of the arrays that scale with the number
    of combinations, ``oracle_cap`` the combinations the direct solver accepts.
    """

    model_config = ConfigDict(frozen=True, extra='forbid')

    start: StartMethod = StartMethod.GREEDY
    pair_variant: PairVariant = PairVariant.LARGE
    tol: float = Field(default=1e-6, gt=0)
    max_iter: int = Field(default=100_000, ge=1)
    recompute_period: int = Field(default=500, ge=1)
    polish: bool = True
    memory_cap: int = Field(default=8 * GIB, gt=0)
    oracle_cap: int = Field(default=200_000, ge=1)
    transport_method: TransportMethod = TransportMethod.MODI

    @property
    def variant(self):
        return f'{self.start.value}/{self.pair_variant.value}'
