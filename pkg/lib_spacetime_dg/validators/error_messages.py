from enum import Enum


class ErrorMessagesCons(str, Enum):
    # basics
    required = "%(key)s is required."
    invalid = "%(key)s is not valid."
    not_a_choice = "%(key)s must be one of %(choices)s, got %(value)r."
    out_of_range = "%(key)s must lie in [%(low)s, %(high)s], got %(value)r."
    not_positive = "%(key)s must be positive, got %(value)r."
