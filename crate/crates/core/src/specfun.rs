//! Spherical Bessel kernels of the first kind and their closed-form radial
//! integrals.
//!
//! Three evaluation regimes are used, all in binary64:
//!
//! * `|x| <= 1`: the ascending series, summed order by order;
//! * `|x| > n_max`: upward recurrence from `j_0` and `j_1`;
//! * otherwise: Miller's downward recurrence, normalized against whichever
//!   of `j_0`, `j_1` is larger in magnitude at `x`.
//!
//! Negative arguments are reduced through `j_l(-x) = (-1)^l j_l(x)`.

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 1.0;
const RESCALE_ABOVE: f64 = 1e200;
const RESCALE_BY: f64 = 1e-200;

/// `j_{l-1}(x)`, `j_l(x)` and `j_{l+1}(x)` evaluated together.
///
/// For `l = 0` the lower neighbour is the irregular `j_{-1}(x) = cos x / x`,
/// which is infinite at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselTriple {
    pub prev: f64,
    pub this: f64,
    pub next: f64,
}

impl BesselTriple {
    /// Evaluate the neighbourhood of order `l` at `x`. `x` must be finite.
    pub fn at(l: u32, x: f64) -> Self {
        if l == 0 {
            let mut out = [0.0; 2];
            fill_orders(0, 1, x, &mut out);
            let prev = if x == 0.0 { f64::INFINITY } else { x.cos() / x };
            return BesselTriple {
                prev,
                this: out[0],
                next: out[1],
            };
        }
        let mut out = [0.0; 3];
        fill_orders(l - 1, l + 1, x, &mut out);
        BesselTriple {
            prev: out[0],
            this: out[1],
            next: out[2],
        }
    }

    /// `u_l(x) = x^{-1} d/dx [x j_l(x)] = [(l+1) j_{l-1} - l j_{l+1}] / (2l+1)`.
    #[inline]
    pub fn u(&self, l: u32) -> f64 {
        let lf = l as f64;
        ((lf + 1.0) * self.prev - lf * self.next) / (2.0 * lf + 1.0)
    }

    /// `j_l'(x) = [l j_{l-1} - (l+1) j_{l+1}] / (2l+1)`; for `l = 0`, `-j_1`.
    #[inline]
    pub fn deriv(&self, l: u32) -> f64 {
        if l == 0 {
            return -self.next;
        }
        let lf = l as f64;
        (lf * self.prev - (lf + 1.0) * self.next) / (2.0 * lf + 1.0)
    }

    /// `j_l^2 - j_{l+1} j_{l-1}`, the bracket of Lommel's first integral.
    #[inline]
    pub fn lommel_bracket(&self) -> f64 {
        self.this * self.this - self.next * self.prev
    }
}

/// Spherical Bessel function `j_l(x)`.
pub fn bessel_j(l: u32, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("bessel_j argument {x} is not finite")));
    }
    let mut out = [0.0; 1];
    fill_orders(l, l, x, &mut out);
    Ok(out[0])
}

/// `j_0(x), ..., j_{l_max}(x)` into `out[..=l_max]`.
pub fn bessel_j_orders(l_max: u32, x: f64, out: &mut [f64]) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("bessel_j argument {x} is not finite")));
    }
    if out.len() < l_max as usize + 1 {
        return Err(Error::InvalidInput(format!(
            "output buffer holds {} orders, need {}",
            out.len(),
            l_max + 1
        )));
    }
    fill_orders(0, l_max, x, &mut out[..=l_max as usize]);
    Ok(())
}

/// The curl kernel `u_l(x) = x^{-1} d/dx [x j_l(x)]`.
///
/// Finite at the origin for `l >= 1` (`u_1(0) = 2/3`, `u_l(0) = 0` beyond);
/// `u_0(x) = cos x / x` is singular there.
pub fn bessel_u(l: u32, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("bessel_u argument {x} is not finite")));
    }
    if l == 0 {
        if x == 0.0 {
            return Err(Error::Singularity("u_0(x) = cos x / x is singular at x = 0".into()));
        }
        return Ok(x.cos() / x);
    }
    Ok(BesselTriple::at(l, x).u(l))
}

/// `d/dx j_l(x)`.
pub fn bessel_j_deriv(l: u32, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("bessel_j' argument {x} is not finite")));
    }
    Ok(BesselTriple::at(l, x).deriv(l))
}

/// Lommel's first integral
/// `int_0^a r^2 j_l(alpha r)^2 dr = (a^3/2) [j_l^2 - j_{l+1} j_{l-1}](alpha a)`.
pub fn lommel_first(l: u32, alpha: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidInput(format!("radius must be positive and finite, got {a}")));
    }
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("wavenumber must be finite and nonzero, got {alpha}")));
    }
    let t = BesselTriple::at(l, alpha * a);
    Ok(0.5 * a * a * a * t.lommel_bracket())
}

/// Associated Legendre functions `(P_l^m(x), P_{l-1}^m(x))` for
/// `0 <= m <= l`, `|x| <= 1`, without the Condon-Shortley phase.
pub fn assoc_legendre(l: u32, m: u32, x: f64) -> Result<(f64, f64)> {
    if m > l {
        return Err(Error::InvalidInput(format!("m = {m} exceeds l = {l}")));
    }
    if !(x.abs() <= 1.0) {
        return Err(Error::InvalidInput(format!("Legendre argument {x} outside [-1, 1]")));
    }
    let s = (1.0 - x * x).sqrt();
    let mut pmm = 1.0;
    for i in 1..=m {
        pmm *= (2 * i - 1) as f64 * s;
    }
    if l == m {
        return Ok((pmm, 0.0));
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    for n in (m + 2)..=l {
        let next = ((2 * n - 1) as f64 * x * cur - (n + m - 1) as f64 * prev) / (n - m) as f64;
        prev = cur;
        cur = next;
    }
    Ok((cur, prev))
}

/// Fill `out[n - lo]` with `j_n(x)` for `lo <= n <= hi`.
fn fill_orders(lo: u32, hi: u32, x: f64, out: &mut [f64]) {
    debug_assert!(lo <= hi && out.len() == (hi - lo + 1) as usize);
    if x < 0.0 {
        fill_orders(lo, hi, -x, out);
        for (n, v) in (lo..=hi).zip(out.iter_mut()) {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
        return;
    }
    if x == 0.0 {
        for (n, v) in (lo..=hi).zip(out.iter_mut()) {
            *v = if n == 0 { 1.0 } else { 0.0 };
        }
        return;
    }
    if x <= SERIES_LIMIT {
        series(lo, hi, x, out);
    } else if x > hi as f64 {
        upward(lo, hi, x, out);
    } else {
        miller(lo, hi, x, out);
    }
}

fn series(lo: u32, hi: u32, x: f64, out: &mut [f64]) {
    // prefactor x^n / (2n+1)!!
    let mut pre = 1.0;
    let h = -0.5 * x * x;
    for n in 0..=hi {
        if n > 0 {
            pre *= x / (2.0 * n as f64 + 1.0);
        }
        if n < lo {
            continue;
        }
        let two_n = 2.0 * n as f64;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..64 {
            let kf = k as f64;
            term *= h / (kf * (two_n + 2.0 * kf + 1.0));
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        out[(n - lo) as usize] = pre * sum;
    }
}

fn upward(lo: u32, hi: u32, x: f64, out: &mut [f64]) {
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = (j0 - c) / x;
    let mut prev = j0;
    let mut cur = j1;
    for n in 0..=hi {
        let v = match n {
            0 => j0,
            1 => j1,
            _ => {
                let next = (2.0 * (n - 1) as f64 + 1.0) / x * cur - prev;
                prev = cur;
                cur = next;
                cur
            }
        };
        if n >= lo {
            out[(n - lo) as usize] = v;
        }
    }
}

fn miller(lo: u32, hi: u32, x: f64, out: &mut [f64]) {
    let top = (hi as f64).max(x);
    let start = top.ceil() as u32 + 20 + (40.0 * top).sqrt() as u32;
    let mut next = 0.0_f64; // f_{n+1}
    let mut cur = 1e-300_f64; // f_n
    let mut f1 = 0.0;
    let mut n = start;
    loop {
        if n <= hi && n >= lo {
            out[(n - lo) as usize] = cur;
        }
        if n == 1 {
            f1 = cur;
        }
        if n == 0 {
            break;
        }
        let prev = (2.0 * n as f64 + 1.0) / x * cur - next;
        next = cur;
        cur = prev;
        n -= 1;
        if cur.abs() > RESCALE_ABOVE {
            cur *= RESCALE_BY;
            next *= RESCALE_BY;
            f1 *= RESCALE_BY;
            let stored_from = (n + 1).max(lo);
            for m in stored_from..=hi {
                out[(m - lo) as usize] *= RESCALE_BY;
            }
        }
    }
    let f0 = cur;
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = (j0 - c) / x;
    let norm = if j0.abs() >= j1.abs() { j0 / f0 } else { j1 / f1 };
    for v in out.iter_mut() {
        *v *= norm;
    }
}
