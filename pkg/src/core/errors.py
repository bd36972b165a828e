# SPDX-License-Identifier: GPL-3.0-only
"""
Иерархия исключений лаборатории.
Некритичные состояния (вне режима, усечённое окно, неопознанный пузырь)
передаются флагами в результатах.
"""


class LabError(Exception):
    """Базовое исключение пакета."""


class DomainError(LabError, ValueError):
    """Недопустимый математический вход (нулевой вектор, полюс, пустая сетка)."""


class LiftAmbiguityError(DomainError):
    """Нарушено условие продолжения при поднятии в накрытие."""

    def __init__(self, message: str, edge: tuple[object, object]):
        super().__init__(f"{message} (edge {edge[0]} -> {edge[1]})")
        self.edge = edge


class StepRejected(LabError, RuntimeError):
    """Шаг по времени отклонён; required_dt — допустимый шаг."""

    def __init__(self, message: str, required_dt: float):
        super().__init__(f"{message}; required dt <= {required_dt:.3e}")
        self.required_dt = required_dt


class ContractError(LabError, RuntimeError):
    """Нарушен контракт данных (например, нет полей ∂_t в траектории)."""


class SpecError(LabError, ValueError):
    """Недопустимая спецификация начального отображения."""


class ConfigError(LabError, ValueError):
    """Недопустимая конфигурация эксперимента."""
