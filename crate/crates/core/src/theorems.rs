//! Numerical certificates for the boundedness and minimality statements.
//!
//! * Boundedness: `N(k) N(K) - M(k, K)^2 >= 0` for every mode, i.e. the tuned
//!   coefficient never undercuts the untuned one.
//! * Minimality: with `ratio(chi) = N(K(chi)) / M(k, K(chi))^2`,
//!   `ratio(chi) - ratio(chi0) > 0` whenever `chi^2 > chi0^2`, asserted
//!   inside the expansion regime `|chi mu omega| <= 0.1 k^2`.
//! * Expansion of `ratio` about `chi = 0`: closed forms for `j = 2`, the
//!   four radial integrals `c0, c1, d0, d1` for `j = 1`, and a Richardson
//!   finite-difference oracle for both.
//! * The curl recast of the `j = 1` integrals.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{radial_integrals, ratio_from, tuned_wavenumber, Mode, RadialIntegrals};
use crate::quadrature::{gauss_legendre, Quadrature};
use crate::specfun::{assoc_legendre, BesselTriple};

/// Minimality is asserted for `|chi mu omega| <= EXPANSION_REGIME * k^2`.
pub const EXPANSION_REGIME: f64 = 0.1;
/// Strict positivity threshold for minimality margins, relative to `scale`.
pub const UNIQUENESS_THRESHOLD: f64 = 1e-12;
/// Finite-difference steps in units of `k^2 / |mu omega|`.
pub const FD_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginKind {
    Boundedness,
    Minimality,
}

/// Signed slack of one inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginReport {
    pub mode: Mode,
    pub chi: f64,
    pub margin: f64,
    pub kind: MarginKind,
    pub scale: f64,
    pub k: f64,
    pub k_tuned: f64,
    pub integrals: Option<RadialIntegrals>,
}

impl MarginReport {
    pub fn relative(&self) -> f64 {
        self.margin / self.scale
    }
}

pub fn in_expansion_regime(chi: f64, k: f64, mu_omega: f64) -> bool {
    (chi * mu_omega).abs() <= EXPANSION_REGIME * k * k
}

/// `N(k) N(K) - M(k, K)^2` with `scale = N(k) N(K)`.
pub fn boundedness_margin(
    mode: &Mode,
    k: f64,
    chi: f64,
    mu_omega: f64,
    a: f64,
    quad: &Quadrature,
) -> Result<MarginReport> {
    let t = tuned_wavenumber(k, mu_omega, chi)?;
    let ints = radial_integrals(mode, k, t.k_tuned, a, quad)?;
    Ok(MarginReport {
        mode: *mode,
        chi,
        margin: ints.cauchy_schwarz_slack(),
        kind: MarginKind::Boundedness,
        scale: ints.n_self_k * ints.n_self_tuned,
        k,
        k_tuned: t.k_tuned,
        integrals: Some(ints),
    })
}

/// `ratio(chi) = N_j(K(chi)) / M_j(k, K(chi))^2`, i.e. `R|_chi`.
pub fn ratio_at(mode: &Mode, k: f64, chi: f64, mu_omega: f64, a: f64, quad: &Quadrature) -> Result<f64> {
    let t = tuned_wavenumber(k, mu_omega, chi)?;
    let ints = radial_integrals(mode, k, t.k_tuned, a, quad)?;
    ratio_from(mode, &ints)
}

/// `ratio(chi) - ratio(chi0)` with `scale = ratio(chi0)`.
pub fn minimality_margin(
    mode: &Mode,
    k: f64,
    chi: f64,
    chi0: f64,
    mu_omega: f64,
    a: f64,
    quad: &Quadrature,
) -> Result<MarginReport> {
    let t = tuned_wavenumber(k, mu_omega, chi)?;
    tuned_wavenumber(k, mu_omega, chi0)?;
    let r0 = ratio_at(mode, k, chi0, mu_omega, a, quad)?;
    let r = if chi == chi0 { r0 } else { ratio_at(mode, k, chi, mu_omega, a, quad)? };
    Ok(MarginReport {
        mode: *mode,
        chi,
        margin: r - r0,
        kind: MarginKind::Minimality,
        scale: r0,
        k,
        k_tuned: t.k_tuned,
        integrals: None,
    })
}

/// `f1 (chi - chi0) + f2 (chi^2 - chi0^2)`: the minimality margin predicted
/// by the quadratic expansion.
pub fn lowest_order_margin(coeffs: &ExpansionCoeffs, chi: f64, chi0: f64) -> Option<f64> {
    coeffs
        .f2
        .map(|f2| coeffs.f1 * (chi - chi0) + f2 * (chi * chi - chi0 * chi0))
}

/// Angular integrals `(int |Y_lm|^2, int |r x Y_lm|^2)` over the unit sphere,
/// where the vector harmonic is `r grad Y_lm`. Evaluated with a Gauss-Legendre
/// rule in `cos(theta)` that is exact for these integrands.
pub fn angular_norms(l: u32, m: i32) -> Result<(f64, f64)> {
    let m = m.unsigned_abs();
    if m > l {
        return Err(Error::InvalidInput(format!("|m| = {m} exceeds l = {l}")));
    }
    let mut ratio = 1.0; // (l-m)! / (l+m)!
    for i in (l - m + 1)..=(l + m) {
        ratio /= i as f64;
    }
    let norm_sq = (2 * l + 1) as f64 / (4.0 * PI) * ratio;
    let (nodes, weights) = gauss_legendre(l as usize + 2);
    let (lf, mf) = (l as f64, m as f64);
    let mut scalar = 0.0;
    let mut vector = 0.0;
    for (&x, &w) in nodes.iter().zip(&weights) {
        let (p, p_lower) = assoc_legendre(l, m, x)?;
        let sin2 = 1.0 - x * x;
        let dp_dtheta = -(lf * x * p - (lf + mf) * p_lower) / sin2.sqrt();
        scalar += w * p * p;
        vector += w * (dp_dtheta * dp_dtheta + mf * mf * p * p / sin2);
    }
    let phi = 2.0 * PI * norm_sq;
    Ok((phi * scalar, phi * vector))
}

/// Relative mismatch between the curl inner product
/// `int_Omega int_0^a conj(curl[j_l(kr) Y]) . curl[j_l(Kr) Y] r^2 dr`
/// and `(l(l+1))^2 M_1(k, K)`, normalized by `(l(l+1))^2 sqrt(N_1(k) N_1(K))`.
///
/// The curl side uses `d/dr[r j_l(kr)] = j_l(kr) + kr j_l'(kr)` and numerically
/// integrated angular factors, so it shares neither `u_l` nor the angular
/// identities with the right-hand side. The worst case over `m` is returned.
pub fn curl_identity_check(l: u32, k: f64, k_tuned: f64, a: f64, quad: &Quadrature) -> Result<f64> {
    if l == 0 {
        return Err(Error::InvalidInput("curl identity needs l >= 1".into()));
    }
    let mode = Mode::new(1, l, 0)?;
    let ints = radial_integrals(&mode, k, k_tuned, a, quad)?;
    let ll = (l * (l + 1)) as f64;
    let q = quad.with_wavenumber(k.abs().max(k_tuned.abs()));
    // radial parts: int j j dr and int (r j)'_k (r j)'_K dr
    let radial_jj = q
        .integrate(
            |r| BesselTriple::at(l, k * r).this * BesselTriple::at(l, k_tuned * r).this,
            0.0,
            a,
        )?
        .value;
    let radial_dd = q
        .integrate(
            |r| {
                let ta = BesselTriple::at(l, k * r);
                let tb = BesselTriple::at(l, k_tuned * r);
                (ta.this + k * r * ta.deriv(l)) * (tb.this + k_tuned * r * tb.deriv(l))
            },
            0.0,
            a,
        )?
        .value;
    let target = ll * ll * ints.m_cross;
    let gauge = ll * ll * (ints.n_self_k * ints.n_self_tuned).sqrt();
    let mut worst: f64 = 0.0;
    for m in 0..=l as i32 {
        let (scalar, vector) = angular_norms(l, m)?;
        let curl = ll * ll * scalar * radial_jj + vector * radial_dd;
        worst = worst.max((curl - target).abs() / gauge);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionMethod {
    ClosedForm,
    FiniteDifference,
}

/// `ratio(chi) = f0 + f1 chi + f2 chi^2 + O(chi^3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionCoeffs {
    pub j: u8,
    pub f0: f64,
    pub f1: f64,
    pub f2: Option<f64>,
    pub method: ExpansionMethod,
}

fn check_expansion_args(l: u32, k: f64, a: f64, mu_omega: f64) -> Result<()> {
    if l == 0 {
        return Err(Error::InvalidInput("expansion needs l >= 1".into()));
    }
    if k == 0.0 || !k.is_finite() {
        return Err(Error::InvalidInput(format!("k must be finite and nonzero, got {k}")));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {a}")));
    }
    if mu_omega == 0.0 || !mu_omega.is_finite() {
        return Err(Error::InvalidInput(format!("mu*omega must be finite and nonzero, got {mu_omega}")));
    }
    Ok(())
}

/// Quartic form of the `chi^2` coefficient for `j = 2`, with the polynomial
/// coefficients evaluated at Bessel order `nu`. Returns the value and the
/// cancellation factor `sum |terms| / |sum|` of its numerator.
fn f2_j2_form(nu: f64, l: u32, k: f64, a: f64, mu_omega: f64) -> Result<(f64, f64)> {
    let x = k * a;
    let t = BesselTriple::at(l, x);
    let (jl, jm) = (t.this, t.prev);
    let bracket = t.lommel_bracket();
    if !(bracket > 0.0) {
        return Err(Error::IllConditionedExpansion { denominator: bracket });
    }
    let x2 = x * x;
    let terms = [
        x2 * jm.powi(4) * (x2 - nu * nu + 1.0),
        4.0 * x * (nu - 1.0) * jl * jm.powi(3) * (-x2 + nu * nu + nu),
        4.0 * x * jl.powi(3) * jm * (nu * (nu * (nu + 2.0) - 2.0) - x2 * (nu - 1.0)),
        x2 * jl.powi(4) * (x2 - nu * (nu + 4.0)),
        2.0 * jl * jl * jm * jm * (x2 * x2 + x2 * ((nu - 6.0) * nu + 2.0) - 2.0 * nu.powi(4) + 2.0 * nu * nu),
    ];
    let num: f64 = terms.iter().sum();
    let spread: f64 = terms.iter().map(|v| v.abs()).sum();
    let value = mu_omega * mu_omega * num / (6.0 * a.powi(5) * k.powi(6) * bracket.powi(3));
    Ok((value, spread / num.abs()))
}

/// Above this cancellation factor the quartic is replaced by the moment form.
const QUARTIC_MAX_CANCELLATION: f64 = 1e5;

/// `mu^2 omega^2 (n q - p^2) / (4 k^2 n^3)` with `n = int r^2 j^2`,
/// `p = int r^3 j j'`, `q = int r^4 j'^2` over `[0, a]`, arguments `k r`.
fn f2_j2_moments(l: u32, k: f64, a: f64, mu_omega: f64, quad: &Quadrature) -> Result<f64> {
    let q = quad.with_wavenumber(k.abs());
    let n = crate::specfun::lommel_first(l, k, a)?;
    let p = q
        .integrate(
            |r| {
                let t = BesselTriple::at(l, k * r);
                r * r * r * t.this * t.deriv(l)
            },
            0.0,
            a,
        )?
        .value;
    let qq = q
        .integrate(|r| (r * r * BesselTriple::at(l, k * r).deriv(l)).powi(2), 0.0, a)?
        .value;
    Ok(mu_omega * mu_omega * (n * qq - p * p) / (4.0 * k * k * n.powi(3)))
}

/// Closed-form expansion for `j = 2`:
/// `f0 = 2 / (a^3 [j_l^2 - j_{l-1} j_{l+1}](ka))`, `f1 = 0`, and `f2` from the
/// quartic form in `j_l(ka)`, `j_{l-1}(ka)` with polynomial coefficients at
/// the half-integer order `nu = l + 1/2` of the underlying cylindrical
/// Bessel function.
///
/// The quartic cancels badly for `ka` small against `l`; there `f2` is taken
/// from the equivalent moment form, with `p` and `q` by quadrature.
pub fn expansion_j2(l: u32, k: f64, a: f64, mu_omega: f64) -> Result<ExpansionCoeffs> {
    check_expansion_args(l, k, a, mu_omega)?;
    let bracket = BesselTriple::at(l, k * a).lommel_bracket();
    if !(bracket > 0.0) {
        return Err(Error::IllConditionedExpansion { denominator: bracket });
    }
    let (quartic, cancellation) = f2_j2_form(l as f64 + 0.5, l, k, a, mu_omega)?;
    let f2 = if cancellation <= QUARTIC_MAX_CANCELLATION {
        quartic
    } else {
        f2_j2_moments(l, k, a, mu_omega, &Quadrature::new(1e-13)?)?
    };
    Ok(ExpansionCoeffs {
        j: 2,
        f0: 2.0 / (a * a * a * bracket),
        f1: 0.0,
        f2: Some(f2),
        method: ExpansionMethod::ClosedForm,
    })
}

/// The quartic alone, with its cancellation factor.
pub fn f2_j2_quartic(l: u32, k: f64, a: f64, mu_omega: f64) -> Result<(f64, f64)> {
    check_expansion_args(l, k, a, mu_omega)?;
    f2_j2_form(l as f64 + 0.5, l, k, a, mu_omega)
}

/// The same quartic form with the integer order `l` in its polynomial
/// coefficients. Does not reproduce the expansion; kept for comparison.
pub fn f2_j2_integer_order(l: u32, k: f64, a: f64, mu_omega: f64) -> Result<f64> {
    check_expansion_args(l, k, a, mu_omega)?;
    Ok(f2_j2_form(l as f64, l, k, a, mu_omega)?.0)
}

/// Number of step-size scalings tried by [`expansion_fd`], each doubling the
/// previous one.
pub const FD_SCALES: usize = 6;

/// Richardson-extrapolated finite-difference expansion of `ratio` at
/// `chi = 0`.
///
/// The base steps are `FD_STEPS * k^2 / |mu omega|`. They are scanned over
/// the scalings `1, 2, ..., 2^(FD_SCALES - 1)` and the scaling whose `f2` estimate agrees best
/// with the next larger one is kept: small steps lose digits to quadrature
/// noise when `ratio` is nearly flat (small `k a` against `l`), large steps
/// to truncation.
pub fn expansion_fd(mode: &Mode, k: f64, a: f64, mu_omega: f64, quad: &Quadrature) -> Result<ExpansionCoeffs> {
    check_expansion_args(mode.l(), k, a, mu_omega)?;
    let unit = k * k / mu_omega.abs();
    let r0 = ratio_at(mode, k, 0.0, mu_omega, a, quad)?;
    // steps FD_STEPS[2] * 2^i, ascending; window w uses i = w, w+1, w+2.
    // The ladder stops at the first step where the ratio cannot be
    // evaluated; the three base steps must succeed.
    let mut even = Vec::new();
    let mut odd = Vec::new();
    let mut second = Vec::new();
    for i in 0..FD_SCALES + 2 {
        let h = FD_STEPS[2] * (1u32 << i) as f64 * unit;
        let pair = ratio_at(mode, k, h, mu_omega, a, quad).and_then(|p| Ok((p, ratio_at(mode, k, -h, mu_omega, a, quad)?)));
        let (plus, minus) = match pair {
            Ok(pm) => pm,
            Err(e) if i < 3 => return Err(e),
            Err(_) => break,
        };
        even.push(0.5 * (plus + minus));
        odd.push((plus - minus) / (2.0 * h));
        second.push((plus + minus - 2.0 * r0) / (2.0 * h * h));
    }
    let windows = second.len() - 2;
    let window = |v: &[f64], w: usize| richardson([v[w + 2], v[w + 1], v[w]]);
    let best = (0..windows.saturating_sub(1))
        .min_by(|&x, &y| {
            let dx = (window(&second, x) - window(&second, x + 1)).abs();
            let dy = (window(&second, y) - window(&second, y + 1)).abs();
            dx.total_cmp(&dy)
        })
        .unwrap_or(0);
    Ok(ExpansionCoeffs {
        j: mode.j(),
        f0: window(&even, best),
        f1: window(&odd, best),
        f2: Some(window(&second, best)),
        method: ExpansionMethod::FiniteDifference,
    })
}

/// Two Richardson steps on `D(h) = D + c h^2 + d h^4 + ...` sampled at
/// `h, h/2, h/4`.
fn richardson(d: [f64; 3]) -> f64 {
    let r1 = (4.0 * d[1] - d[0]) / 3.0;
    let r2 = (4.0 * d[2] - d[1]) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// The radial integrals `C0, C1, D0, D1` of the `j = 1` expansion
/// numerator and denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppendixCoeffs {
    pub c0: f64,
    pub c1: f64,
    pub d0: f64,
    pub d1: f64,
}

impl AppendixCoeffs {
    pub fn f0(&self) -> f64 {
        self.c0 / (self.d0 * self.d0)
    }

    pub fn f1(&self) -> f64 {
        (self.c1 * self.d0 - 2.0 * self.c0 * self.d1) / self.d0.powi(3)
    }
}

/// `C0, C1, D0, D1` by quadrature of their integrands as written, including
/// the `|k|` and `k^(2-l) |k|^l`, `k^(-l-2) |k|^l` factors.
pub fn appendix_coeffs(l: u32, k: f64, a: f64, mu_omega: f64, quad: &Quadrature) -> Result<AppendixCoeffs> {
    check_expansion_args(l, k, a, mu_omega)?;
    let lf = l as f64;
    let ll = lf * (lf + 1.0);
    let w2 = (2.0 * lf + 1.0).powi(2);
    let ka = k.abs();
    let k2 = k * k;
    let li = l as i32;
    let d0_factor = k.powi(2 - li) * ka.powi(li);
    let d1_factor = k.powi(-li - 2) * ka.powi(li);
    let q = quad.with_wavenumber(ka);

    let c0 = q.integrate(
        |r| {
            let t = BesselTriple::at(l, r * ka);
            (k2 * (lf + 1.0).powi(2) * r * r * t.prev * t.prev
                - 2.0 * k2 * lf * (lf + 1.0) * r * r * t.prev * t.next
                + lf * (k2 * lf * r * r * t.next * t.next + (lf + 1.0) * w2 * t.this * t.this))
                / (ll * w2)
        },
        0.0,
        a,
    )?;
    let c1 = q.integrate(
        |r| {
            let t = BesselTriple::at(l, r * ka);
            -1.0 / (ll * ka * ka)
                * (mu_omega
                    * t.this
                    * ((lf + 1.0) * (-k2 * r * r + 2.0 * lf * lf + lf) * t.this
                        + r * ka * (k2 * r * r - 2.0 * lf * lf - 2.0 * lf) * t.next))
        },
        0.0,
        a,
    )?;
    let d0 = q.integrate(
        |r| {
            let t = BesselTriple::at(l, k * r);
            let s = BesselTriple::at(l, r * ka);
            let u = (lf + 1.0) * t.prev - lf * t.next;
            r * r * d0_factor * u * u / (ll * w2) + t.this * s.this
        },
        0.0,
        a,
    )?;
    let d1 = q.integrate(
        |r| {
            let t = BesselTriple::at(l, k * r);
            -1.0 / (2.0 * ll)
                * (mu_omega
                    * d1_factor
                    * t.this
                    * ((lf + 1.0) * (-k2 * r * r + 2.0 * lf * lf + lf) * t.this
                        + k * r * (k2 * r * r - 2.0 * lf * lf - 2.0 * lf) * t.next))
        },
        0.0,
        a,
    )?;
    Ok(AppendixCoeffs {
        c0: c0.value,
        c1: c1.value,
        d0: d0.value,
        d1: d1.value,
    })
}

/// Closed-form `j = 1` expansion through first order from [`appendix_coeffs`].
pub fn expansion_j1(l: u32, k: f64, a: f64, mu_omega: f64, quad: &Quadrature) -> Result<ExpansionCoeffs> {
    let c = appendix_coeffs(l, k, a, mu_omega, quad)?;
    if c.d0 == 0.0 {
        return Err(Error::DegenerateMode { j: 1, l });
    }
    Ok(ExpansionCoeffs {
        j: 1,
        f0: c.f0(),
        f1: c.f1(),
        f2: None,
        method: ExpansionMethod::ClosedForm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct F1Check {
    /// `|f1| / f0`, in units of `1 / chi`.
    pub residual: f64,
    pub passed: bool,
    pub coeffs: AppendixCoeffs,
}

/// `|C1 D0 - 2 C0 D1| / |D0|^3` relative to `f0 = C0 / D0^2`.
pub fn f1_vanishing_check(l: u32, k: f64, a: f64, mu_omega: f64, tol: f64, quad: &Quadrature) -> Result<F1Check> {
    let c = appendix_coeffs(l, k, a, mu_omega, quad)?;
    if c.d0 == 0.0 {
        return Err(Error::DegenerateMode { j: 1, l });
    }
    let residual = (c.c1 * c.d0 - 2.0 * c.c0 * c.d1).abs() / (c.d0.abs() * c.c0);
    Ok(F1Check {
        residual,
        passed: residual <= tol,
        coeffs: c,
    })
}

/// One point of a certification sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub mode: Mode,
    pub k: f64,
    pub chi: f64,
    pub mu_omega: f64,
    pub a: f64,
}

/// Boundedness margins over `cells`, in input order.
pub fn boundedness_sweep(cells: &[Cell], quad: &Quadrature, exec: Execution) -> Vec<Result<MarginReport>> {
    exec.map(cells, |c| boundedness_margin(&c.mode, c.k, c.chi, c.mu_omega, c.a, quad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cross_integrand, self_integral};
    use crate::specfun::lommel_first;

    fn quad() -> Quadrature {
        Quadrature::new(1e-13).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn boundedness_equality_at_zero_chi() {
        for j in [1u8, 2] {
            for l in 1..=4 {
                let mode = Mode::new(j, l, 0).unwrap();
                for k in [-2.0, 0.5, 1.0] {
                    let rep = boundedness_margin(&mode, k, 0.0, 1.0, 1.7, &quad()).unwrap();
                    assert!(rep.margin.abs() <= 1e-10 * rep.scale, "j={j} l={l} k={k}: {}", rep.relative());
                }
            }
        }
    }

    #[test]
    fn boundedness_off_diagonal_by_direct_quadrature() {
        // K = 2 with k = 1: chi mu omega = k^2 - K^2 = -3
        let mode = Mode::new(2, 1, 0).unwrap();
        let rep = boundedness_margin(&mode, 1.0, -3.0, 1.0, 1.0, &quad()).unwrap();
        assert_eq!(rep.k_tuned, 2.0);
        let q = quad().with_wavenumber(2.0);
        let lhs_a = q.integrate(|r| (r * BesselTriple::at(1, r).this).powi(2), 0.0, 1.0).unwrap().value;
        let lhs_b = q.integrate(|r| (r * BesselTriple::at(1, 2.0 * r).this).powi(2), 0.0, 1.0).unwrap().value;
        let rhs = q.integrate(|r| cross_integrand(2, 1, 1.0, 2.0, r), 0.0, 1.0).unwrap().value;
        let direct = lhs_a * lhs_b - rhs * rhs;
        assert!(direct > 0.0);
        assert!(rep.margin >= 0.0);
        assert!((rep.margin - direct).abs() <= 1e-10 * rep.scale);
    }

    #[test]
    fn boundedness_parity_in_k() {
        let mode = Mode::new(1, 2, 0).unwrap();
        // K = 0.7 for |k| = 1.5 at mu omega = 1
        let chi = 1.5 * 1.5 - 0.7 * 0.7;
        let neg = boundedness_margin(&mode, -1.5, chi, 1.0, 3.0, &quad()).unwrap();
        let pos = boundedness_margin(&mode, 1.5, chi, 1.0, 3.0, &quad()).unwrap();
        assert_eq!(neg.margin, pos.margin);
        assert!((neg.k_tuned - 0.7).abs() < 1e-15);
    }

    #[test]
    fn evanescent_is_propagated() {
        let mode = Mode::new(2, 1, 0).unwrap();
        assert!(matches!(
            boundedness_margin(&mode, 1.0, 2.0, 1.0, 1.0, &quad()),
            Err(Error::Evanescent { .. })
        ));
    }

    #[test]
    fn angular_norms_match_identities() {
        for l in 1..=8u32 {
            for m in -(l as i32)..=(l as i32) {
                let (s, v) = angular_norms(l, m).unwrap();
                assert!((s - 1.0).abs() < 1e-13, "l={l} m={m} s={s}");
                assert!(rel(v, (l * (l + 1)) as f64) < 1e-13, "l={l} m={m} v={v}");
            }
        }
    }

    #[test]
    fn curl_identity_examples() {
        assert!(curl_identity_check(1, 1.0, 1.0, 2.0, &quad()).unwrap() <= 1e-12);
        assert!(curl_identity_check(3, 1.0, 2.0, 5.0, &quad()).unwrap() <= 1e-10);
        assert!(curl_identity_check(5, -0.7, 0.7, 3.0, &quad()).unwrap() <= 1e-12);
    }

    #[test]
    fn minimality_examples() {
        let mode = Mode::new(2, 2, 0).unwrap();
        let same = minimality_margin(&mode, 1.0, 0.05, 0.05, 1.0, 2.0, &quad()).unwrap();
        assert_eq!(same.margin, 0.0);

        let coeffs = expansion_j2(2, 1.0, 2.0, 1.0).unwrap();
        let chi = 0.01;
        let m = minimality_margin(&mode, 1.0, chi, 0.0, 1.0, 2.0, &quad()).unwrap();
        let predicted = coeffs.f2.unwrap() * chi * chi;
        assert!(m.margin > 0.0);
        assert!(rel(m.margin, predicted) < 0.05, "{} vs {predicted}", m.margin);

        // j = 1: antisymmetric part is O(chi^3)
        let mode1 = Mode::new(1, 2, 0).unwrap();
        let odd = |c: f64| {
            let p = minimality_margin(&mode1, 1.0, c, 0.0, 1.0, 2.0, &quad()).unwrap().margin;
            let q = minimality_margin(&mode1, 1.0, -c, 0.0, 1.0, 2.0, &quad()).unwrap().margin;
            p - q
        };
        let ratio = odd(0.02) / odd(0.01);
        assert!((ratio - 8.0).abs() < 0.2, "odd-part scaling {ratio}");
    }

    #[test]
    fn j2_expansion_examples() {
        let c = expansion_j2(1, 1.0, PI, 1.0).unwrap();
        assert!(rel(c.f0, 2.0 / PI) < 1e-13);
        assert!(rel(c.f0, 1.0 / lommel_first(1, 1.0, PI).unwrap()) < 1e-13);
        assert_eq!(c.f1, 0.0);
        for (l, k, a, mw) in [(1u32, 1.0, 1.0, 1.0), (3, 2.0, 1.0, 1.0), (4, -2.0, 1.0, 0.5), (2, 1.0, PI, 0.5)] {
            let closed = expansion_j2(l, k, a, mw).unwrap();
            let fd = expansion_fd(&Mode::new(2, l, 0).unwrap(), k, a, mw, &quad()).unwrap();
            assert!(rel(closed.f2.unwrap(), fd.f2.unwrap()) < 1e-4, "l={l} k={k}");
            assert!(rel(closed.f0, fd.f0) < 1e-8);
            // the integer-order reading misses by orders of magnitude here
            let literal = f2_j2_integer_order(l, k, a, mw).unwrap();
            assert!(rel(literal, fd.f2.unwrap()) > 0.1);
        }
    }

    /// Independent closed form for the `j = 2` second coefficient, built from
    /// `int_0^X x^4 j_l'(x)^2 dx = A j^2 + B j j' + C j'^2` (verified by
    /// differentiation against the spherical Bessel equation).
    fn f2_j2_via_antiderivative(l: u32, k: f64, a: f64, mu_omega: f64) -> f64 {
        let x = k * a;
        let t = BesselTriple::at(l, x);
        let (y, dy) = (t.this, t.deriv(l));
        let ll = (l * (l + 1)) as f64;
        let c3 = 1.25 - ll / 6.0;
        let big_a = x.powi(5) / 6.0 + (5.0 / 12.0 - ll / 3.0) * x.powi(3) - ll * c3 * x;
        let big_b = 5.0 / 6.0 * x.powi(4) + c3 * x * x;
        let big_c = x.powi(5) / 6.0 + c3 * x.powi(3);
        let q = (big_a * y * y + big_b * y * dy + big_c * dy * dy) / k.powi(5);
        let n = a.powi(3) / 2.0 * t.lommel_bracket();
        let p = (x.powi(3) * y * y / 2.0 - 1.5 * x.powi(3) * t.lommel_bracket() / 2.0) / k.powi(4);
        mu_omega * mu_omega * (n * q - p * p) / (4.0 * k * k * n.powi(3))
    }

    #[test]
    fn j2_second_coefficient_against_antiderivative_form() {
        for l in 1..=6u32 {
            for k in [0.5, 1.0, 2.0, -2.0] {
                for a in [2.0, PI] {
                    let closed = expansion_j2(l, k, a, 0.5).unwrap().f2.unwrap();
                    let other = f2_j2_via_antiderivative(l, k, a, 0.5);
                    assert!(rel(closed, other) < 1e-6, "l={l} k={k} a={a}: {closed} vs {other}");
                }
            }
        }
    }

    #[test]
    fn small_argument_falls_back_to_moments() {
        // reference values from 40-digit quadrature
        let reference = [(2u32, 1.056525958606443521909), (3, 116.1236535362126819887)];
        for (l, want) in reference {
            let (quartic, cancellation) = f2_j2_quartic(l, 0.5, 1.0, 0.5).unwrap();
            assert!(cancellation > 1e6);
            assert!(rel(quartic, want) < 1e-4);
            let f2 = expansion_j2(l, 0.5, 1.0, 0.5).unwrap().f2.unwrap();
            assert!(rel(f2, want) < 1e-8, "{f2} vs {want}");
        }
    }

    #[test]
    fn appendix_consistency() {
        let q = quad();
        for (l, k) in [(1u32, 1.0), (2, -1.3), (3, 2.0), (4, -2.0)] {
            let c = appendix_coeffs(l, k, 2.0, 0.7, &q).unwrap();
            let n1 = self_integral(1, l, k.abs(), 2.0, &q).unwrap();
            assert!(rel(c.c0, n1) < 1e-10);
            let sign = if k < 0.0 && l % 2 == 1 { -1.0 } else { 1.0 };
            assert!(rel(c.d0, sign * c.c0) < 1e-12, "l={l} k={k}");
            if k > 0.0 {
                assert_eq!(c.d0, c.c0);
            }
        }
    }

    #[test]
    fn appendix_first_order_terms_are_derivatives() {
        // C1 = dN_1(K(chi))/dchi and D1 = dM_1(k, K(chi))/dchi at chi = 0
        let q = quad();
        let (l, k, a, mw) = (2u32, -1.3, PI, 1.0);
        let c = appendix_coeffs(l, k, a, mw, &q).unwrap();
        let h = 1e-5;
        let kt = |chi: f64| (k * k - chi * mw).sqrt();
        let n = |chi: f64| self_integral(1, l, kt(chi), a, &q).unwrap();
        let m = |chi: f64| crate::model::cross_integral(1, l, k, kt(chi), a, &q).unwrap();
        assert!(rel(c.c1, (n(h) - n(-h)) / (2.0 * h)) < 1e-7);
        assert!(rel(c.d1, (m(h) - m(-h)) / (2.0 * h)) < 1e-7);
    }

    #[test]
    fn f1_vanishes() {
        let q = quad();
        let a = f1_vanishing_check(1, 1.0, 2.0, 1.0, 1e-8, &q).unwrap();
        assert!(a.passed, "{}", a.residual);
        let b = f1_vanishing_check(4, -2.0, 1.0, 0.5, 1e-8, &q).unwrap();
        assert!(b.passed, "{}", b.residual);
        let fd = expansion_fd(&Mode::new(1, 4, 0).unwrap(), -2.0, 1.0, 0.5, &q).unwrap();
        assert!(fd.f1.abs() / fd.f0 <= 1e-6);
        let closed = expansion_j1(4, -2.0, 1.0, 0.5, &q).unwrap();
        assert!(rel(closed.f0, fd.f0) < 1e-8);
    }

    #[test]
    fn sweep_matches_pointwise() {
        let cells: Vec<Cell> = (0..6)
            .map(|i| Cell {
                mode: Mode::new(1 + (i % 2) as u8, 1 + i / 2, 0).unwrap(),
                k: 1.2,
                chi: 0.1 * i as f64,
                mu_omega: 1.0,
                a: 2.0,
            })
            .collect();
        let seq = boundedness_sweep(&cells, &quad(), Execution::Sequential);
        let par = boundedness_sweep(&cells, &quad(), Execution::Parallel);
        assert_eq!(seq, par);
    }

    #[test]
    fn lowest_order_margin_is_symmetric_when_f1_vanishes() {
        let c = ExpansionCoeffs {
            j: 1,
            f0: 1.0,
            f1: 0.0,
            f2: Some(0.3),
            method: ExpansionMethod::FiniteDifference,
        };
        assert_eq!(lowest_order_margin(&c, -0.2, 0.2), Some(0.0));
        assert!(lowest_order_margin(&c, 0.3, 0.2).unwrap() > 0.0);
    }
}
