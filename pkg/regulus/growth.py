import dataclasses
import math
import typing

import regulus.errors


SAMPLE_POINTS = (0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 16.0, 64.0)


@dataclasses.dataclass(frozen=True, eq=False)
class GrowthFunction:
    """An increasing F with F(x) >= 1 + x. Values too large for a float evaluate to
    +inf, and 1/F is then 0."""

    descriptor: str
    evaluator: typing.Callable[[float], float]
    memo: typing.Dict[float, float] = dataclasses.field(
        default_factory=dict, init=False, repr=False
    )

    def __post_init__(self) -> None:
        for x in SAMPLE_POINTS:
            self(x)

    def __call__(self, x: float) -> float:
        x = float(x)
        if x in self.memo:
            return self.memo[x]

        try:
            y = float(self.evaluator(x))
        except OverflowError:
            y = math.inf

        if math.isnan(y) or y < 1 + x:
            raise regulus.errors.ConfigurationError(
                f"Growth function '{self.descriptor}' gives F({x}) = {y}, but a "
                "growth function must satisfy F(x) >= 1 + x."
            )
        for seen, value in self.memo.items():
            if (seen < x and value > y) or (seen > x and value < y):
                raise regulus.errors.ConfigurationError(
                    f"Growth function '{self.descriptor}' is not increasing: "
                    f"F({seen}) = {value} but F({x}) = {y}."
                )

        self.memo[x] = y
        return y

    def reciprocal(self, x: float) -> float:
        """1/F(x), which is 0 when F(x) overflowed."""
        return 1.0 / self(x)


def _power(base: float, x: float) -> float:
    return math.inf if math.isinf(x) else base**x


def affine(a: float, b: float) -> GrowthFunction:
    return GrowthFunction(f"affine:{a:g},{b:g}", lambda x: a * x + b)


def exponential(base: float = 2.0) -> GrowthFunction:
    """F(x) = base^x + x + 1."""

    if base < 1:
        raise regulus.errors.ConfigurationError(
            f"Exponential growth needs a base of at least 1, got {base}."
        )
    return GrowthFunction(f"exp:{base:g}", lambda x: _power(base, x) + x + 1)


def tower(height: int) -> GrowthFunction:
    """F(x) = 2^2^...^x (height times) + x + 1."""

    if height < 0:
        raise regulus.errors.ConfigurationError(
            f"Tower height must be nonnegative, got {height}."
        )

    def evaluate(x: float) -> float:
        y = x
        for _ in range(height):
            y = _power(2.0, y)
        return y + x + 1

    return GrowthFunction(f"tower:{height}", evaluate)


def compose(outer: GrowthFunction, inner: GrowthFunction) -> GrowthFunction:
    return GrowthFunction(
        f"{outer.descriptor}|{inner.descriptor}", lambda x: outer(inner(x))
    )


def parse_growth(descriptor: str) -> GrowthFunction:
    """Parse 'affine:a,b', 'exp:base', 'tower:h' or a composition 'outer|inner'."""

    if "|" in descriptor:
        outer, _, inner = descriptor.partition("|")
        return compose(parse_growth(outer), parse_growth(inner))

    name, _, argument = descriptor.strip().partition(":")
    try:
        match name:
            case "affine":
                a, b = (float(v) for v in argument.split(","))
                return affine(a, b)
            case "exp":
                return exponential(float(argument) if argument else 2.0)
            case "tower":
                return tower(int(argument) if argument else 1)
    except ValueError as ex:
        raise regulus.errors.ConfigurationError(
            f"Invalid parameters in growth function '{descriptor}': {ex}"
        ) from ex

    raise regulus.errors.ConfigurationError(
        f"Unknown growth function '{descriptor}'! Use affine:a,b, exp:base, tower:h "
        "or a composition outer|inner."
    )
