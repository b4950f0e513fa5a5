//! Differentiable overlap / out-of-canvas penalty on an encoded layout estimate.
//!
//! `R = Σ_{i<j} g_i g_j n_i n_j (ox_ij · oy_ij)² + Σ_i g_i · Σ_edges max(0, excursion)²`
//!
//! where `g` gates by presence, `n` exempts background slots, and `ox`, `oy` are the
//! positive overlaps along each axis. Both gates are smoothsteps that are exactly
//! 0 or 1 at the encoded values `±1`, so `R` vanishes on any overlap-free in-canvas
//! encoded layout.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use crate::layout::{LayoutTensor, COL_CX, COL_CY, COL_H, COL_PRESENCE, COL_W, N_MAX};

/// Smoothstep over `[-0.5, 0.5]` and its derivative.
fn gate(v: f64) -> (f64, f64) {
    let s = (v + 0.5).clamp(0.0, 1.0);
    (s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s))
}

#[derive(Clone, Copy)]
struct Slot {
    l: f64,
    r: f64,
    t: f64,
    b: f64,
    presence: f64,
    d_presence: f64,
    exempt_not: f64,
    d_exempt_not: f64,
}

fn slot(x: ArrayView2<'_, f64>, i: usize) -> Slot {
    let unit = |c: usize| 0.5 * (x[[i, c]] + 1.0);
    let (cx, cy, w, h) = (unit(COL_CX), unit(COL_CY), unit(COL_W), unit(COL_H));
    let (presence, d_presence) = gate(x[[i, COL_PRESENCE]]);
    let (bg, d_bg) = gate(x[[i, 0]]);
    Slot {
        l: cx - 0.5 * w,
        r: cx + 0.5 * w,
        t: cy - 0.5 * h,
        b: cy + 0.5 * h,
        presence,
        d_presence,
        exempt_not: 1.0 - bg,
        d_exempt_not: -d_bg,
    }
}

/// Overlap along one axis and which endpoints are active: `(overlap, i_is_min_end, i_is_max_start)`.
fn overlap(lo_i: f64, hi_i: f64, lo_j: f64, hi_j: f64) -> (f64, bool, bool) {
    let i_hi = hi_i <= hi_j;
    let i_lo = lo_i >= lo_j;
    let o = hi_i.min(hi_j) - lo_i.max(lo_j);
    (o.max(0.0), i_hi, i_lo)
}

/// Accumulates `R` for one `N_MAX × ROW_DIM` block; writes `∂R/∂x` into `grad` when given.
fn accumulate(x: ArrayView2<'_, f64>, mut grad: Option<ArrayViewMut2<'_, f64>>) -> f64 {
    let slots: Vec<Slot> = (0..N_MAX).map(|i| slot(x, i)).collect();
    // d/d(l, r, t, b) per slot, then d/dx of the presence and background columns via the gates.
    let mut d = vec![[0.0f64; 6]; N_MAX];
    let mut total = 0.0;

    for i in 0..N_MAX {
        let si = slots[i];
        for j in i + 1..N_MAX {
            let sj = slots[j];
            let (ox, i_r, i_l) = overlap(si.l, si.r, sj.l, sj.r);
            let (oy, i_b, i_t) = overlap(si.t, si.b, sj.t, sj.b);
            if ox == 0.0 || oy == 0.0 {
                continue;
            }
            let g = si.presence * sj.presence * si.exempt_not * sj.exempt_not;
            let q = (ox * oy).powi(2);
            total += g * q;
            if grad.is_none() {
                continue;
            }
            let dq_dox = g * 2.0 * ox * oy * oy;
            let dq_doy = g * 2.0 * ox * ox * oy;
            // ox = min(r_i, r_j) - max(l_i, l_j)
            let ri = if i_r { i } else { j };
            d[ri][1] += dq_dox;
            let li = if i_l { i } else { j };
            d[li][0] -= dq_dox;
            let bi = if i_b { i } else { j };
            d[bi][3] += dq_doy;
            let ti = if i_t { i } else { j };
            d[ti][2] -= dq_doy;

            d[i][4] += q * si.d_presence * sj.presence * si.exempt_not * sj.exempt_not;
            d[j][4] += q * si.presence * sj.d_presence * si.exempt_not * sj.exempt_not;
            d[i][5] += q * si.presence * sj.presence * si.d_exempt_not * sj.exempt_not;
            d[j][5] += q * si.presence * sj.presence * si.exempt_not * sj.d_exempt_not;
        }
    }

    for (i, s) in slots.iter().enumerate() {
        let ex = [(-s.l).max(0.0), (s.r - 1.0).max(0.0), (-s.t).max(0.0), (s.b - 1.0).max(0.0)];
        let e: f64 = ex.iter().map(|v| v * v).sum();
        if e == 0.0 {
            continue;
        }
        total += s.presence * e;
        d[i][0] -= s.presence * 2.0 * ex[0];
        d[i][1] += s.presence * 2.0 * ex[1];
        d[i][2] -= s.presence * 2.0 * ex[2];
        d[i][3] += s.presence * 2.0 * ex[3];
        d[i][4] += e * s.d_presence;
    }

    if let Some(g) = grad.as_mut() {
        for (i, di) in d.iter().enumerate() {
            let [dl, dr, dt, db, dp, dn] = *di;
            // l = cx - w/2, r = cx + w/2 and cx = (x + 1)/2.
            g[[i, COL_CX]] += 0.5 * (dl + dr);
            g[[i, COL_W]] += 0.5 * 0.5 * (dr - dl);
            g[[i, COL_CY]] += 0.5 * (dt + db);
            g[[i, COL_H]] += 0.5 * 0.5 * (db - dt);
            g[[i, COL_PRESENCE]] += dp;
            g[[i, 0]] += dn;
        }
    }
    total
}

pub fn penalty(x0_hat: &LayoutTensor) -> f64 {
    accumulate(x0_hat.as_array().view(), None)
}

pub fn penalty_and_grad(x0_hat: &LayoutTensor) -> (f64, Array2<f64>) {
    let mut g = Array2::zeros(x0_hat.as_array().dim());
    let r = accumulate(x0_hat.as_array().view(), Some(g.view_mut()));
    (r, g)
}

/// Penalty of one slot block inside a larger stacked batch, adding its gradient into `grad`.
pub fn penalty_rows(block: ArrayView2<'_, f64>, grad: ArrayViewMut2<'_, f64>) -> f64 {
    accumulate(block, Some(grad))
}
