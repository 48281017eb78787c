//! Physical data model: substrate classification, tuned wavenumber, the
//! radial self- and cross-integrals, mode coefficients and source energies.
//!
//! Units are scaled so that `eps_0 = mu_0 = 1`, hence `k0 = omega` and the
//! permeability entering `K = sqrt(k^2 - chi mu omega)` is `mu_r`.
//!
//! Mode coefficients are `R = N_j(K) / M_j(k, K)^2` with the per-mode
//! normalization constant set to one. Energies are therefore defined up to a
//! fixed positive factor per mode; every comparison made in
//! [`crate::theorems`] is between coefficients of the same mode, so signs of
//! energy differences are unaffected.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;
use crate::specfun::{lommel_first, BesselTriple};

/// A cross-integral smaller than this fraction of `sqrt(N(k) N(K))` is
/// treated as zero.
pub const DEGENERATE_CROSS_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubstrateClass {
    Ordinary,
    DpsMetamaterial,
    DngMetamaterial,
}

impl fmt::Display for SubstrateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubstrateClass::Ordinary => "ordinary",
            SubstrateClass::DpsMetamaterial => "DPS-metamaterial",
            SubstrateClass::DngMetamaterial => "DNG-metamaterial",
        })
    }
}

/// Lossless, homogeneous spherical source region of radius `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Substrate {
    pub epsilon_r: f64,
    pub mu_r: f64,
    pub omega: f64,
    pub a: f64,
    pub k0: f64,
}

impl Substrate {
    pub fn new(epsilon_r: f64, mu_r: f64, omega: f64, a: f64) -> Result<Self> {
        for (name, v) in [("epsilon_r", epsilon_r), ("mu_r", mu_r), ("omega", omega), ("a", a)] {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite, got {v}")));
            }
        }
        if !(omega > 0.0) {
            return Err(Error::InvalidInput(format!("omega must be > 0, got {omega}")));
        }
        if !(a > 0.0) {
            return Err(Error::InvalidInput(format!("a must be > 0, got {a}")));
        }
        let product = epsilon_r * mu_r;
        if product == 0.0 {
            return Err(Error::UnsupportedMedium(
                "k = 0 (nihility medium); a real nonzero propagation constant is required".into(),
            ));
        }
        if product < 0.0 {
            return Err(Error::UnsupportedMedium(format!(
                "epsilon_r * mu_r = {product} must be > 0 for a real propagation constant"
            )));
        }
        Ok(Substrate {
            epsilon_r,
            mu_r,
            omega,
            a,
            k0: omega,
        })
    }

    /// `k = sign(epsilon_r) k0 sqrt(epsilon_r mu_r)`; negative for DNG media.
    pub fn k(&self) -> f64 {
        self.epsilon_r.signum() * self.k0 * (self.epsilon_r * self.mu_r).sqrt()
    }

    pub fn mu_omega(&self) -> f64 {
        self.mu_r * self.omega
    }

    /// Same substrate with both constitutive parameters negated.
    pub fn mirrored(&self) -> Self {
        Substrate {
            epsilon_r: -self.epsilon_r,
            mu_r: -self.mu_r,
            ..*self
        }
    }
}

/// `k >= k0` is ordinary (the boundary `k = k0` included), `0 < k < k0` is
/// DPS, `k < 0` is DNG.
pub fn classify_substrate(s: &Substrate) -> SubstrateClass {
    let k = s.k();
    if k < 0.0 {
        SubstrateClass::DngMetamaterial
    } else if k < s.k0 {
        SubstrateClass::DpsMetamaterial
    } else {
        SubstrateClass::Ordinary
    }
}

/// Multipole channel `(j, l, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Mode {
    j: u8,
    l: u32,
    m: i32,
}

impl Mode {
    pub fn new(j: u8, l: u32, m: i32) -> Result<Self> {
        if j != 1 && j != 2 {
            return Err(Error::InvalidInput(format!("multipole type j must be 1 or 2, got {j}")));
        }
        if l == 0 {
            return Err(Error::InvalidInput("multipole order l must be >= 1".into()));
        }
        if m.unsigned_abs() > l {
            return Err(Error::InvalidInput(format!("|m| = {} exceeds l = {l}", m.unsigned_abs())));
        }
        Ok(Mode { j, l, m })
    }

    pub fn j(&self) -> u8 {
        self.j
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn m(&self) -> i32 {
        self.m
    }
}

/// Lagrange multiplier `chi` and the tuned wavenumber it induces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningState {
    pub chi: f64,
    pub k: f64,
    pub k_tuned: f64,
    pub mu_omega: f64,
}

/// `K = +sqrt(k^2 - chi mu omega)`, the principal root.
pub fn tuned_wavenumber(k: f64, mu_omega: f64, chi: f64) -> Result<TuningState> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::InvalidInput(format!("k must be finite and nonzero, got {k}")));
    }
    if !mu_omega.is_finite() || !chi.is_finite() {
        return Err(Error::InvalidInput("chi and mu*omega must be finite".into()));
    }
    let k_squared = k * k - chi * mu_omega;
    if !(k_squared > 0.0) {
        return Err(Error::Evanescent { k_squared });
    }
    // chi = 0 must give K = |k| exactly
    let k_tuned = if chi == 0.0 { k.abs() } else { k_squared.sqrt() };
    Ok(TuningState {
        chi,
        k,
        k_tuned,
        mu_omega,
    })
}

impl TuningState {
    pub fn for_substrate(s: &Substrate, chi: f64) -> Result<Self> {
        tuned_wavenumber(s.k(), s.mu_omega(), chi)
    }
}

/// Self-integrals `N_j(k)`, `N_j(K)` and cross-integral `M_j(k, K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialIntegrals {
    pub n_self_k: f64,
    pub n_self_tuned: f64,
    pub m_cross: f64,
}

impl RadialIntegrals {
    /// `N(k) N(K) - M(k, K)^2`, nonnegative by Cauchy-Schwarz.
    pub fn cauchy_schwarz_slack(&self) -> f64 {
        self.n_self_k * self.n_self_tuned - self.m_cross * self.m_cross
    }
}

/// Integrand of `M_j(k, K)` at radius `r`.
///
/// * `j = 2`: `r^2 j_l(kr) j_l(Kr)`
/// * `j = 1`: `j_l(kr) j_l(Kr) + k K r^2 u_l(kr) u_l(Kr) / (l(l+1))`
#[inline]
pub fn cross_integrand(j: u8, l: u32, k: f64, k_tuned: f64, r: f64) -> f64 {
    let a = BesselTriple::at(l, k * r);
    let b = BesselTriple::at(l, k_tuned * r);
    if j == 2 {
        r * r * a.this * b.this
    } else {
        let ll = (l * (l + 1)) as f64;
        a.this * b.this + k * k_tuned * r * r * a.u(l) * b.u(l) / ll
    }
}

/// `M_j(k, K) = int_0^a cross_integrand dr`, by quadrature.
pub fn cross_integral(j: u8, l: u32, k: f64, k_tuned: f64, a: f64, quad: &Quadrature) -> Result<f64> {
    let q = quad.with_wavenumber(k.abs().max(k_tuned.abs()));
    Ok(q.integrate(|r| cross_integrand(j, l, k, k_tuned, r), 0.0, a)?.value)
}

/// `N_j(alpha) = M_j(alpha, alpha)`; Lommel's closed form for `j = 2`.
pub fn self_integral(j: u8, l: u32, alpha: f64, a: f64, quad: &Quadrature) -> Result<f64> {
    if j == 2 {
        lommel_first(l, alpha, a)
    } else {
        cross_integral(1, l, alpha, alpha, a, quad)
    }
}

pub fn radial_integrals(mode: &Mode, k: f64, k_tuned: f64, a: f64, quad: &Quadrature) -> Result<RadialIntegrals> {
    if k == 0.0 || k_tuned == 0.0 {
        return Err(Error::InvalidInput("wavenumbers must be nonzero".into()));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {a}")));
    }
    let (j, l) = (mode.j(), mode.l());
    Ok(RadialIntegrals {
        n_self_k: self_integral(j, l, k, a, quad)?,
        n_self_tuned: self_integral(j, l, k_tuned, a, quad)?,
        m_cross: cross_integral(j, l, k, k_tuned, a, quad)?,
    })
}

/// `N_j(K) / M_j(k, K)^2` from precomputed integrals, rejecting a vanishing
/// cross-integral.
pub fn ratio_from(mode: &Mode, ints: &RadialIntegrals) -> Result<f64> {
    let gauge = (ints.n_self_k * ints.n_self_tuned).sqrt();
    if ints.m_cross.abs() <= DEGENERATE_CROSS_RATIO * gauge {
        return Err(Error::DegenerateMode {
            j: mode.j(),
            l: mode.l(),
        });
    }
    Ok(ints.n_self_tuned / (ints.m_cross * ints.m_cross))
}

/// `R|_chi` for `mode` in substrate `s` at tuning `t`. Independent of `m`.
pub fn mode_coefficient(mode: &Mode, s: &Substrate, t: &TuningState, quad: &Quadrature) -> Result<f64> {
    let ints = radial_integrals(mode, s.k(), t.k_tuned, s.a, quad)?;
    ratio_from(mode, &ints)
}

/// Prescribed multipole moments `a_{l,m}^{(j)}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceSpec {
    amplitudes: BTreeMap<Mode, Complex64>,
}

impl SourceSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, mode: Mode, amplitude: Complex64) -> Result<()> {
        if !(amplitude.re.is_finite() && amplitude.im.is_finite()) {
            return Err(Error::InvalidInput(format!("amplitude for {mode:?} is not finite")));
        }
        self.amplitudes.insert(mode, amplitude);
        Ok(())
    }

    pub fn amplitudes(&self) -> &BTreeMap<Mode, Complex64> {
        &self.amplitudes
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Mode coefficients at tuning `t` for every mode in the spec.
    pub fn coefficients(&self, s: &Substrate, t: &TuningState, quad: &Quadrature) -> Result<BTreeMap<Mode, f64>> {
        // R depends on (j, l) only
        let mut by_order: BTreeMap<(u8, u32), f64> = BTreeMap::new();
        let mut out = BTreeMap::new();
        for mode in self.amplitudes.keys() {
            let key = (mode.j(), mode.l());
            let r = match by_order.get(&key) {
                Some(r) => *r,
                None => {
                    let r = mode_coefficient(mode, s, t, quad)?;
                    by_order.insert(key, r);
                    r
                }
            };
            out.insert(*mode, r);
        }
        Ok(out)
    }
}

/// `sum R |a|^2` over the spec.
pub fn source_energy(spec: &SourceSpec, coefficients: &BTreeMap<Mode, f64>) -> Result<f64> {
    spec.amplitudes
        .iter()
        .map(|(mode, amp)| {
            coefficients
                .get(mode)
                .map(|r| r * amp.norm_sqr())
                .ok_or(Error::IncompleteSpec {
                    j: mode.j(),
                    l: mode.l(),
                    m: mode.m(),
                })
        })
        .sum()
}
