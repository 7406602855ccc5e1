import math
from typing import Any, Iterable, Optional

from lib_spacetime_dg.exceptions import ConfigurationError
from lib_spacetime_dg.validators.error_messages import ErrorMessagesCons


class BaseValidator:
    message = ErrorMessagesCons.invalid
    code = "invalid"

    def __init__(self, key: str, message: Optional[str] = None):
        self.key = key
        if message:
            self.message = message

    def fail(self, value: Any, **params) -> None:
        params = {"key": self.key, "value": value, **params}
        message = self.message.value if isinstance(self.message, ErrorMessagesCons) else self.message
        raise ConfigurationError(message, code=self.code, params=params, attr=self.key)

    def __call__(self, value: Any) -> Any:
        raise NotImplementedError


class RequiredValidator(BaseValidator):
    message = ErrorMessagesCons.required
    code = "required"

    def __call__(self, value):
        if value is None or value == "":
            self.fail(value)
        return value


class ChoiceValidator(BaseValidator):
    message = ErrorMessagesCons.not_a_choice
    code = "invalid_choice"

    def __init__(self, key: str, choices: Iterable[str], message: Optional[str] = None):
        super().__init__(key, message)
        self.choices = tuple(choices)

    def __call__(self, value):
        normalized = str(value).strip().lower().replace("_", "-")
        if normalized not in self.choices:
            self.fail(value, choices=", ".join(self.choices))
        return normalized


class RangeValidator(BaseValidator):
    message = ErrorMessagesCons.out_of_range
    code = "out_of_range"

    def __init__(self, key: str, low: float, high: float = math.inf, message: Optional[str] = None):
        """
        :param low: smallest admissible value (inclusive)
        :param high: largest admissible value (inclusive)
        """
        super().__init__(key, message)
        self.low = low
        self.high = high

    def __call__(self, value):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not self.low <= value <= self.high:
            self.fail(value, low=self.low, high=self.high)
        return value


class PositiveValidator(BaseValidator):
    message = ErrorMessagesCons.not_positive
    code = "not_positive"

    def __call__(self, value):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0 or not math.isfinite(value):
            self.fail(value)
        return value
