"""
Luminance Curve Bank
Learnable monotone luminance curves that index an image's illumination by
distance to its histogram descriptor.

Curve n is cumsum(softplus(P_n)) / sum(softplus(P_n)), so every curve is
strictly increasing and ends at 1 whatever the raw parameters are.
"""
import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit, softmax
from sklearn.utils import check_random_state

from ..exceptions import DataError, LibraryError, NumericError

MAGIC = b'PLC1'
_HEADER = struct.Struct('<IId')


def softplus(x):
    return np.logaddexp(0.0, x)


def inverse_softplus(y):
    return np.log(np.expm1(y))


def curves_from_params(params):
    """(N, R) raw parameters -> (N, R) monotone curves in (0, 1]"""
    increments = softplus(np.atleast_2d(params))
    cumulative = np.cumsum(increments, axis=1)
    return cumulative / cumulative[:, -1:]


def curve_distances(curves, values):
    """L1 distance between a histogram descriptor and every curve"""
    return np.abs(values[None, :] - curves).sum(axis=1)


def soft_weights(distances, tau, active=None):
    """softmax(-d / tau), restricted to `active` curves when given"""
    logits = -np.asarray(distances, dtype=np.float64) / tau
    if active is not None:
        logits = np.where(active, logits, -np.inf)
    return softmax(logits)


@dataclass(frozen=True)
class CurveMatch:
    hard_id: int
    weights: np.ndarray
    distances: np.ndarray


@dataclass(frozen=True)
class CurveBank:
    """N learnable curves of R points each, plus the softmax temperature"""
    params: np.ndarray
    tau: float = 0.1

    @property
    def n_curves(self):
        return self.params.shape[0]

    @property
    def n_points(self):
        return self.params.shape[1]

    def curves(self):
        return curves_from_params(self.params)

    def curve_values(self, n):
        if not 0 <= n < self.n_curves:
            raise DataError(f'curve index {n} outside [0, {self.n_curves})')
        return self.curves()[n]

    def quantized(self):
        """Copy with parameters rounded to the float32 storage precision"""
        return replace(self, params=self.params.astype('<f4').astype(np.float64))

    def to_bytes(self):
        header = MAGIC + _HEADER.pack(self.n_curves, self.n_points, self.tau)
        return header + self.params.astype('<f4').tobytes()

    @classmethod
    def from_bytes(cls, payload):
        if payload[:4] != MAGIC:
            raise DataError('not a curve bank file (bad magic)')
        n_curves, n_points, tau = _HEADER.unpack_from(payload, 4)
        offset = 4 + _HEADER.size
        expected = offset + 4 * n_curves * n_points
        if len(payload) != expected:
            raise DataError(f'curve bank file has {len(payload)} bytes, expected {expected}')
        params = np.frombuffer(payload, dtype='<f4', offset=offset).reshape(n_curves, n_points)
        return cls(params=params.astype(np.float64), tau=tau)


def init_curve_bank(n_curves=12, n_points=256, seed=0, tau=0.1):
    """
    Curves start near gamma curves x^g, g log-spaced over [0.3, 3.0], so the
    bank spans dark-boost to dark-crush; seeded noise of amplitude 1e-3 breaks
    exact symmetry.
    """
    if n_curves < 1 or n_points < 2:
        raise DataError(f'curve bank needs N >= 1 and R >= 2, got N={n_curves}, R={n_points}')
    if tau <= 0:
        raise DataError(f'softmax temperature must be positive, got {tau}')
    gammas = np.ones(1) if n_curves == 1 else np.geomspace(0.3, 3.0, n_curves)
    x = np.arange(1, n_points + 1) / n_points
    targets = x[None, :] ** gammas[:, None]
    increments = np.diff(targets, axis=1, prepend=0.0) * n_points
    params = inverse_softplus(np.maximum(increments, 1e-12))
    rng = check_random_state(seed)
    params = params + 1e-3 * rng.standard_normal(params.shape)
    return CurveBank(params=params, tau=float(tau))


def match_hard(bank, h):
    """Nearest curve by L1 distance; lowest index wins ties"""
    values = np.asarray(h.values, dtype=np.float64)
    if values.shape != (bank.n_points,):
        raise DataError(
            f'histogram has {values.size} points but the bank curves have {bank.n_points}'
        )
    distances = curve_distances(bank.curves(), values)
    return CurveMatch(
        hard_id=int(np.argmin(distances)),
        weights=soft_weights(distances, bank.tau),
        distances=distances,
    )


def match_soft(bank, h):
    """
    Temperature softmax over negative curve distances.

    Hard and soft matching share one computation: both return the same
    CurveMatch, carrying the argmin `hard_id` and the softmax `weights`.
    """
    return match_hard(bank, h)


def spectral_consistency_loss(params, values, feature, slots, tau, active=None):
    """L1 distance between a feature and its softly retrieved library entry"""
    distances = curve_distances(curves_from_params(params), values)
    weights = soft_weights(distances, tau, active)
    retrieved = weights @ slots
    return float(np.abs(feature - retrieved).sum())


def spectral_consistency_grad(bank, h, feature, library):
    """
    Loss ||f - sum_n w_n M[n]||_1 and its analytic gradient w.r.t. the raw
    curve parameters.

    The chain runs through the softmax weights, the L1 curve distances and the
    softplus/cumsum parameterization. Library entries are constants. Only
    initialized slots take part in the softmax; the rest get weight 0.
    """
    active = library.initialized.copy()
    if not active.any():
        raise LibraryError('spectral consistency needs at least one initialized library slot')
    feature = np.asarray(feature, dtype=np.float64)
    if feature.shape != (library.dim,):
        raise LibraryError(f'feature dim {feature.size} does not match library dim {library.dim}')
    if library.n_slots != bank.n_curves:
        raise LibraryError('library slot count differs from the number of curves')
    values = np.asarray(h.values, dtype=np.float64)
    if values.shape != (bank.n_points,):
        raise DataError('histogram length does not match the curve bank')

    params = bank.params
    increments = softplus(params)
    cumulative = np.cumsum(increments, axis=1)
    total = cumulative[:, -1:]
    curves = cumulative / total
    distances = np.abs(values[None, :] - curves).sum(axis=1)
    weights = soft_weights(distances, bank.tau, active)
    slots = library.slots
    residual = feature - weights @ slots
    loss = float(np.abs(residual).sum())

    d_retrieved = -np.sign(residual)
    d_weights = slots @ d_retrieved
    d_logits = weights * (d_weights - weights @ d_weights)
    d_distances = -d_logits / bank.tau
    d_curves = d_distances[:, None] * np.sign(curves - values[None, :])
    # curve_i = cumulative_i / total
    suffix = np.cumsum(d_curves[:, ::-1], axis=1)[:, ::-1]
    d_increments = suffix / total - (d_curves * cumulative).sum(axis=1, keepdims=True) / total ** 2
    grad = d_increments * expit(params)
    return loss, grad


def plc_sgd_step(bank, grad, lr):
    """Plain SGD on the raw parameters; monotonicity is structural"""
    if lr < 0:
        raise DataError(f'learning rate must be non-negative, got {lr}')
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise NumericError('curve bank gradient contains non-finite values')
    if lr == 0 or not grad.any():
        return bank
    return replace(bank, params=bank.params - lr * grad)
