"""Memoryless RF-chain conversion based on Saleh's AM/AM and AM/PM model.

The amplitude and phase maps are

    f_A(a)   = alpha_a * a   / (1 + beta_a * a**2)
    f_Phi(a) = alpha_phi * a**2 / (1 + beta_phi * a**2)      [radians]

and a complex input ``x`` is mapped to ``f_A(|x|) * exp(j f_Phi(|x|)) * x / |x|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

# Relative slack allowed between the PA's peak output power and the disc radius.
PEAK_POWER_TOL = 0.02
# Fraction of epsilon used when calibrating the ripple, leaves room for sampling noise.
RIPPLE_HEADROOM = 0.95


@dataclass(frozen=True)
class SalehParams:
    alpha_a: float = 2.159
    beta_a: float = 1.152
    alpha_phi: float = 4.003
    beta_phi: float = 9.104

    def __post_init__(self):
        vals = (self.alpha_a, self.beta_a, self.alpha_phi, self.beta_phi)
        if not all(math.isfinite(v) and v >= 0 for v in vals):
            raise ValueError(f"Saleh parameters must be finite and non-negative, got {vals}")
        if self.alpha_a <= 0:
            raise ValueError("alpha_a must be positive")


@dataclass(frozen=True)
class RipplePerturbation:
    """Smooth gain ripple ``1 + gain_ripple * sin(ripple_freq * |x|)`` on the model output.

    Leave ``gain_ripple`` as None to have it calibrated from the model error epsilon.
    """

    ripple_freq: float = 3.0
    gain_ripple: float | None = None


def _check_amplitude(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("amplitude must be non-negative")
    return a


@dataclass(frozen=True)
class RfModel:
    """Analytic RF conversion function plus an optional deviating 'true' PA.

    Attributes:
        saleh: Saleh model parameters.
        p_out: saturation (peak output) power in linear units.
        epsilon: mean-square error bound between the true PA and the model.
        perturbation: if given, :meth:`true_output` applies a calibrated gain
            ripple; otherwise the analytic model is taken as the truth.
        operating_power: mean input power of the Rayleigh amplitude law used
            to calibrate the ripple. Defaults to the squared peak input amplitude.
    """

    saleh: SalehParams = field(default_factory=SalehParams)
    p_out: float = 1.0
    epsilon: float = 0.0
    perturbation: RipplePerturbation | None = None
    operating_power: float | None = None

    def __post_init__(self):
        if not (self.p_out > 0 and math.isfinite(self.p_out)):
            raise ValueError(f"p_out must be positive, got {self.p_out}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.saleh.beta_a > 0:
            _, peak = self.saturation_peak()
            if peak**2 > self.p_out * (1 + PEAK_POWER_TOL):
                raise ValueError(
                    f"PA peak output power {peak**2:.4f} exceeds p_out={self.p_out} "
                    f"beyond the {PEAK_POWER_TOL:.0%} tolerance"
                )
        if self.operating_power is None:
            op = 1.0 / self.saleh.beta_a if self.saleh.beta_a > 0 else 1.0
            object.__setattr__(self, "operating_power", op)
        if self.perturbation is not None:
            limit = self._max_gain_ripple(self.perturbation.ripple_freq)
            gr = self.perturbation.gain_ripple
            if gr is None:
                object.__setattr__(self, "perturbation", replace(self.perturbation, gain_ripple=limit))
            elif gr < 0 or gr > limit * (1 + 1e-12):
                raise ValueError(f"gain_ripple {gr} violates the epsilon bound (max {limit:.4g})")

    def amp_conv(self, a):
        a = _check_amplitude(a)
        return self.saleh.alpha_a * a / (1.0 + self.saleh.beta_a * a * a)

    def phase_conv(self, a):
        a = _check_amplitude(a)
        a2 = a * a
        return self.saleh.alpha_phi * a2 / (1.0 + self.saleh.beta_phi * a2)

    def rf_convert(self, x):
        x = np.asarray(x, dtype=complex)
        a = np.abs(x)
        out = self.amp_conv(a) * np.exp(1j * (np.angle(x) + self.phase_conv(a)))
        return complex(out) if out.ndim == 0 else out

    def saturation_peak(self) -> tuple[float, float]:
        """Return ``(a_peak, f_A(a_peak))``, the maximizer and maximum of the AM/AM curve.

        Raises:
            ValueError: if ``beta_a == 0`` (the model has unbounded gain).
        """
        b = self.saleh.beta_a
        if b <= 0:
            raise ValueError("beta_a = 0: AM/AM curve is linear with no finite peak")
        return 1.0 / math.sqrt(b), self.saleh.alpha_a / (2.0 * math.sqrt(b))

    def true_output(self, x):
        out = np.asarray(self.rf_convert(x), dtype=complex)
        if self.perturbation is not None:
            p = self.perturbation
            out = out * (1.0 + p.gain_ripple * np.sin(p.ripple_freq * np.abs(x)))
        return complex(out) if out.ndim == 0 else out

    def _ripple_energy(self, freq: float) -> float:
        # E[f_A(a)^2 sin^2(freq a)] for a Rayleigh amplitude with E[a^2] = operating_power
        s2 = self.operating_power

        def integrand(a):
            fa = self.saleh.alpha_a * a / (1.0 + self.saleh.beta_a * a * a)
            pdf = 2.0 * a / s2 * math.exp(-a * a / s2)
            return fa * fa * math.sin(freq * a) ** 2 * pdf

        val, _ = integrate.quad(integrand, 0.0, math.inf, limit=200)
        return val

    def _max_gain_ripple(self, freq: float) -> float:
        energy = self._ripple_energy(freq)
        if energy <= 0:
            return 0.0
        return math.sqrt(RIPPLE_HEADROOM * self.epsilon / energy)
