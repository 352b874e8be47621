"""Resource grid, finite-blocklength link layer, and the TDD frame round.

The spectrum is L sub-bands of K channel blocks each. A transmitter splits
its power and payload equally over the blocks of its selected sub-bands;
every block is decoded independently with the finite-blocklength error
probability and a packet succeeds only if all of its blocks do. Each frame
runs an uplink phase (sensors report state) and a downlink phase in which
only subnetworks whose uplink succeeded send the control packet, reusing
the uplink mask and power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

__all__ = [
    "noise_power_w",
    "channel_uses",
    "block_bits",
    "bler",
    "split_power",
    "resolve_phase",
    "PhyParams",
    "TddOutcome",
    "tdd_round",
    "tdd_rounds_batch",
]

LOG2E = np.log2(np.e)
SQRT2 = np.sqrt(2.0)


def noise_power_w(bandwidth_hz: float, nf_db: float) -> float:
    """Thermal noise power over a bandwidth: -174 dBm/Hz plus noise figure."""
    return 1e-3 * 10.0 ** ((-174.0 + nf_db) / 10.0) * bandwidth_hz


def channel_uses(block_bandwidth_hz: float, tau_s: float) -> int:
    """Complex channel uses of one block over one phase: floor(2 B tau)."""
    return int(np.floor(2.0 * block_bandwidth_hz * tau_s))


def block_bits(payload_bits: int, n_subbands_selected: int, blocks_per_subband: int) -> int:
    """Bits carried by each active block under the equal payload split."""
    return int(np.ceil(payload_bits / (n_subbands_selected * blocks_per_subband)))


def _bler_pos(gamma, bits, uses):
    # sqrt(n V(g)) * sqrt(2) = sqrt(n) * log2(e) * sqrt(g (g+2)) / (1+g),
    # written without the cancellation-prone 1 - 1/(1+g)^2 form
    s = 1.0 + gamma
    spread = np.sqrt(gamma * (gamma + 2.0) / (s * s))
    num = (0.5 * uses) * np.log2(s) - bits + 0.5 * np.log2(uses)
    return 0.5 * erfc(num / ((np.sqrt(uses) * LOG2E) * spread))


def bler(gamma, bits, uses):
    """Finite-blocklength block error probability.

    eps = Q( (n/2 * log2(1+g) - b + 1/2 * log2 n) / sqrt(n V(g)) ) with
    dispersion V(g) = g(g+2) / (2(g+1)^2) * log2(e)^2 at n channel uses and
    b bits. gamma = 0 carries no information and maps to eps = 1 without
    evaluating the V(0) = 0 division.
    """
    gamma = np.asarray(gamma, dtype=float)
    pos = gamma > 0
    if pos.all():
        return _bler_pos(gamma, np.asarray(bits, dtype=float), uses)
    bits = np.broadcast_to(np.asarray(bits, dtype=float), gamma.shape)
    out = np.ones(gamma.shape)
    if pos.any():
        out[pos] = _bler_pos(gamma[pos], bits[pos], uses)
    return out


def split_power(power_w: np.ndarray, mask: np.ndarray, blocks_per_subband: int) -> np.ndarray:
    """Per-block transmit power under the equal split, (n, L); zero on
    unselected sub-bands. A row's active blocks sum back to its total power
    up to float rounding."""
    n_sel = mask.sum(axis=1)
    denom = np.maximum(n_sel * blocks_per_subband, 1)
    return np.where(mask, (power_w / denom)[:, None], 0.0)


def resolve_phase(gains, tx, p_blk, bits, noise_block_w, uses, rng):
    """Resolve one TDD phase.

    gains: (n, n, L, K) per-block power gains, transmitter-major;
    tx: (n,) who transmits; p_blk: (n, L) per-block powers; bits: (n,)
    per-block payload bits of each transmitter. Returns (ok, denom) where
    denom (n, L, K) is interference-plus-noise at each receiver, excluding
    its own desired signal -- the exact SINR denominator, also the RSSI
    integrand.
    """
    n = gains.shape[0]
    if not tx.any():
        return np.zeros(n, dtype=bool), np.full(gains.shape[1:], noise_block_w)
    p_act = np.where(tx[:, None], p_blk, 0.0)
    denom = np.einsum("tl,trlk->rlk", p_act, gains)
    own = p_act[:, :, None] * np.einsum("ttlk->tlk", gains)
    denom -= own
    denom += noise_block_w
    # tiny negative residue from the subtraction is numerically possible
    np.maximum(denom, noise_block_w, out=denom)

    ok = tx.copy()
    rows, bands = np.nonzero(p_act > 0.0)
    if rows.size:
        gamma = own[rows, bands] / denom[rows, bands]
        eps = bler(gamma, bits[rows][:, None], uses)
        good = (rng.random(eps.shape) < 1.0 - eps).all(axis=1)
        ok[rows[~good]] = False
    return ok, denom


@dataclass(frozen=True)
class PhyParams:
    n_subbands: int
    blocks_per_subband: int
    noise_block_w: float
    uses: int
    ul_payload_bits: int
    dl_payload_bits: int


@dataclass
class TddOutcome:
    ul_tx: np.ndarray
    ul_ok: np.ndarray
    dl_tx: np.ndarray
    dl_ok: np.ndarray
    loop_closed: np.ndarray
    rssi: np.ndarray


def tdd_round(
    gain_ul: np.ndarray,
    gain_dl: np.ndarray,
    mask: np.ndarray,
    power_w: np.ndarray,
    due: np.ndarray,
    phy: PhyParams,
    rng: np.random.Generator,
) -> TddOutcome:
    """One synchronized frame: uplink phase, then downlink for the uplink
    survivors; the per-sub-band RSSI (interference plus noise summed over
    the K blocks of each sub-band, measured at every AP during the uplink
    phase) is returned for the allocators."""
    k = phy.blocks_per_subband
    n_sel = mask.sum(axis=1)
    tx = due & (n_sel > 0) & (power_w > 0.0)
    p_blk = split_power(power_w, mask, k)

    sel = np.maximum(n_sel, 1)
    ul_bits = np.ceil(phy.ul_payload_bits / (sel * k))
    ul_ok, denom_ul = resolve_phase(
        gain_ul, tx, p_blk, ul_bits, phy.noise_block_w, phy.uses, rng
    )
    rssi = denom_ul.sum(axis=2)

    dl_bits = np.ceil(phy.dl_payload_bits / (sel * k))
    dl_ok, _ = resolve_phase(
        gain_dl, ul_ok, p_blk, dl_bits, phy.noise_block_w, phy.uses, rng
    )
    # downlink transmitters are exactly the uplink survivors, and a loop
    # closes exactly when its downlink got through
    return TddOutcome(
        ul_tx=tx, ul_ok=ul_ok, dl_tx=ul_ok, dl_ok=dl_ok, loop_closed=dl_ok, rssi=rssi
    )


def _resolve_phase_all(gains, p_act, bits, noise_block_w, uses, rng):
    """Resolve one phase for every frame at once. gains (T, n, n, L, K),
    p_act (T, n, L) already zeroed outside the transmitting rows, bits
    (T, n). Returns fail (T, n), True where a transmitted packet was lost."""
    denom = np.einsum("tnl,tnrlk->trlk", p_act, gains)
    own = p_act[..., None] * np.einsum("tiilk->tilk", gains)
    denom -= own
    denom += noise_block_w
    np.maximum(denom, noise_block_w, out=denom)

    frames, n = p_act.shape[:2]
    fail = np.zeros((frames, n), dtype=bool)
    ts, rows, bands = np.nonzero(p_act > 0.0)
    if ts.size:
        gamma = own[ts, rows, bands] / denom[ts, rows, bands]
        eps = bler(gamma, bits[ts, rows][:, None], uses)
        bad = ~(rng.random(eps.shape) < 1.0 - eps).all(axis=1)
        fail[ts[bad], rows[bad]] = True
    return fail


def tdd_rounds_batch(
    gains_ul: np.ndarray,
    gains_dl: np.ndarray,
    mask: np.ndarray,
    power_w: np.ndarray,
    due: np.ndarray,
    phy: PhyParams,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Resolve every frame of an episode in one pass.

    Valid whenever the per-frame masks and powers are already known, i.e.
    for allocators that never read radio feedback. gains_ul / gains_dl are
    (T, n, n, L, K), mask (T, n, L), power_w and due (T, n). Identical to
    repeated tdd_round calls except that the success draws are consumed
    phase-major (all uplink frames, then all downlink frames) instead of
    frame-major. Returns (ul_tx, ul_ok, dl_ok), each (T, n).
    """
    k = phy.blocks_per_subband
    n_sel = mask.sum(axis=2)
    tx = due & (n_sel > 0) & (power_w > 0.0)
    sel_k = np.maximum(n_sel, 1) * k
    p_blk = np.where(mask, (power_w / sel_k)[:, :, None], 0.0)

    p_act = np.where(tx[:, :, None], p_blk, 0.0)
    ul_bits = np.ceil(phy.ul_payload_bits / sel_k)
    fail = _resolve_phase_all(gains_ul, p_act, ul_bits, phy.noise_block_w, phy.uses, rng)
    ul_ok = tx & ~fail

    p_act = np.where(ul_ok[:, :, None], p_blk, 0.0)
    dl_bits = np.ceil(phy.dl_payload_bits / sel_k)
    fail = _resolve_phase_all(gains_dl, p_act, dl_bits, phy.noise_block_w, phy.uses, rng)
    dl_ok = ul_ok & ~fail
    return tx, ul_ok, dl_ok
