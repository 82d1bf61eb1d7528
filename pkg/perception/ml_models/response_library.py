"""
Response Libraries
N-slot feature stores, one slot per curve id, written by exponential moving
average. The luminance library holds luminance compensation features and the
structural library holds structural compensation features.
"""
import logging
import struct
import threading

import numpy as np

from ..exceptions import DataError, LibraryError, NumericError, UninitializedSlotError

logger = logging.getLogger(__name__)

MAGIC = b'RLB1'
_HEADER = struct.Struct('<IId')


class ResponseLibrary:
    """EMA feature store with single-writer, multi-reader access"""

    def __init__(self, n_slots, dim, alpha=0.05):
        if n_slots < 1 or dim < 1:
            raise LibraryError(f'library needs positive size, got {n_slots} x {dim}')
        if not 0 < alpha < 1:
            raise LibraryError(f'EMA momentum must lie in (0, 1), got {alpha}')
        self.n_slots = n_slots
        self.dim = dim
        self.alpha = float(alpha)
        self.slots = np.zeros((n_slots, dim))
        self.initialized = np.zeros(n_slots, dtype=bool)
        self._lock = threading.RLock()

    def _check_slot(self, slot):
        if not 0 <= slot < self.n_slots:
            raise LibraryError(f'slot {slot} outside [0, {self.n_slots})')

    def ema_update(self, slot, feature):
        """
        First write copies the feature; later writes blend
        slot <- (1 - alpha) * slot + alpha * feature.
        """
        self._check_slot(slot)
        feature = np.asarray(feature, dtype=np.float64).ravel()
        if feature.size != self.dim:
            raise LibraryError(f'feature dim {feature.size} does not match library dim {self.dim}')
        if not np.all(np.isfinite(feature)):
            raise NumericError('refusing to write a non-finite feature into the library')
        with self._lock:
            if self.initialized[slot]:
                self.slots[slot] = (1.0 - self.alpha) * self.slots[slot] + self.alpha * feature
            else:
                self.slots[slot] = feature
                self.initialized[slot] = True
        return self

    def nearest_initialized(self, slot):
        """Closest written slot by index distance; lower index wins ties"""
        written = np.flatnonzero(self.initialized)
        if written.size == 0:
            raise LibraryError('library is empty')
        return int(written[np.argmin(np.abs(written - slot))])

    def read_slot(self, slot, fallback=False):
        """
        Copy of one slot. With `fallback`, an unwritten slot is served by the
        nearest written one instead of raising.
        """
        self._check_slot(slot)
        with self._lock:
            if not self.initialized[slot]:
                if not fallback:
                    raise UninitializedSlotError(slot)
                nearest = self.nearest_initialized(slot)
                logger.warning('slot %d never written, reading slot %d instead', slot, nearest)
                slot = nearest
            return self.slots[slot].copy()

    def read_soft(self, weights):
        """Weighted sum of slots; weights must vanish on unwritten slots"""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (self.n_slots,):
            raise LibraryError(f'expected {self.n_slots} weights, got shape {weights.shape}')
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-6:
            raise LibraryError('soft read weights must form a probability vector')
        with self._lock:
            unwritten = (~self.initialized) & (weights != 0)
            if unwritten.any():
                raise UninitializedSlotError(int(np.flatnonzero(unwritten)[0]))
            return weights @ self.slots

    @property
    def is_empty(self):
        return not self.initialized.any()

    def quantize(self):
        """Round slots to the float32 storage precision in place"""
        with self._lock:
            self.slots = self.slots.astype('<f4').astype(np.float64)
        return self

    def stats(self):
        norms = np.linalg.norm(self.slots, axis=1)
        return {
            'n_slots': self.n_slots,
            'dim': self.dim,
            'alpha': self.alpha,
            'initialized': [bool(flag) for flag in self.initialized],
            'slot_norms': [round(float(n), 6) for n in norms],
        }

    def to_bytes(self):
        with self._lock:
            return (
                MAGIC
                + _HEADER.pack(self.n_slots, self.dim, self.alpha)
                + self.initialized.astype(np.uint8).tobytes()
                + self.slots.astype('<f4').tobytes()
            )

    @classmethod
    def from_bytes(cls, payload):
        if payload[:4] != MAGIC:
            raise DataError('not a response library file (bad magic)')
        n_slots, dim, alpha = _HEADER.unpack_from(payload, 4)
        offset = 4 + _HEADER.size
        expected = offset + n_slots + 4 * n_slots * dim
        if len(payload) != expected:
            raise DataError(f'library file has {len(payload)} bytes, expected {expected}')
        library = cls(n_slots, dim, alpha)
        library.initialized = np.frombuffer(payload, dtype=np.uint8, count=n_slots, offset=offset) != 0
        slots = np.frombuffer(payload, dtype='<f4', offset=offset + n_slots)
        library.slots = slots.reshape(n_slots, dim).astype(np.float64)
        return library
