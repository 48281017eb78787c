//! Globally adaptive Gauss-Kronrod (10/21 point) integration on a finite
//! interval, with an oscillation-aware initial panelization.
//!
//! Panels never sample their endpoints, so integrands with a removable
//! singularity at `r = 0` are evaluated only on `(0, a]`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1); odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Outcome of one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub panels_used: usize,
}

/// Integrator settings.
///
/// `wavenumber` is the largest spatial frequency present in the integrand
/// (`max(|k|, |K|)` for products of `j_l(kr)` and `j_l(Kr)`); the initial
/// panel width is `pi / max(wavenumber, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub max_panels: usize,
    pub wavenumber: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            rel_tol: 1e-12,
            abs_floor: 1e-15,
            max_panels: 50_000,
            wavenumber: 1.0,
        }
    }
}

impl Quadrature {
    pub const MIN_REL_TOL: f64 = 1e-14;
    pub const MAX_REL_TOL: f64 = 1e-3;

    pub fn new(rel_tol: f64) -> Result<Self> {
        if !(Self::MIN_REL_TOL..=Self::MAX_REL_TOL).contains(&rel_tol) {
            return Err(Error::InvalidInput(format!(
                "rel_tol {rel_tol} outside [{}, {}]",
                Self::MIN_REL_TOL,
                Self::MAX_REL_TOL
            )));
        }
        Ok(Quadrature {
            rel_tol,
            ..Default::default()
        })
    }

    pub fn with_wavenumber(mut self, wavenumber: f64) -> Self {
        self.wavenumber = wavenumber.abs();
        self
    }

    pub fn with_max_panels(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels.max(1);
        self
    }

    /// Integrate `f` over `[lo, hi]`.
    pub fn integrate<F>(&self, f: F, lo: f64, hi: f64) -> Result<QuadratureResult>
    where
        F: Fn(f64) -> f64,
    {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidInput(format!("bad interval [{lo}, {hi}]")));
        }
        let omega = if self.wavenumber.is_finite() {
            self.wavenumber.max(1.0)
        } else {
            1.0
        };
        let width = hi - lo;
        let wanted = (width * omega / PI).ceil().max(1.0);
        let initial = if wanted > self.max_panels as f64 {
            self.max_panels
        } else {
            wanted as usize
        };

        let mut panels = Vec::with_capacity(initial * 2);
        let mut heap = BinaryHeap::with_capacity(initial * 2);
        let step = width / initial as f64;
        for i in 0..initial {
            let a = lo + step * i as f64;
            let b = if i + 1 == initial { hi } else { lo + step * (i + 1) as f64 };
            let p = gk21(&f, a, b)?;
            heap.push(Worst(p.err, panels.len()));
            panels.push(p);
        }
        if (initial as f64) < wanted {
            let (value, abs_error) = totals(&panels);
            return Err(Error::Convergence {
                estimate: value,
                abs_error,
                panels: panels.len(),
            });
        }

        let (mut value, mut abs_error) = totals(&panels);
        while abs_error > (self.rel_tol * value.abs()).max(self.abs_floor) {
            if panels.len() >= self.max_panels {
                return Err(Error::Convergence {
                    estimate: value,
                    abs_error,
                    panels: panels.len(),
                });
            }
            let Worst(_, idx) = heap.pop().expect("panel heap is never empty");
            let parent = panels[idx];
            let mid = 0.5 * (parent.lo + parent.hi);
            if mid <= parent.lo || mid >= parent.hi {
                // no representable midpoint left
                return Err(Error::Convergence {
                    estimate: value,
                    abs_error,
                    panels: panels.len(),
                });
            }
            let left = gk21(&f, parent.lo, mid)?;
            let right = gk21(&f, mid, parent.hi)?;
            panels[idx] = left;
            heap.push(Worst(left.err, idx));
            heap.push(Worst(right.err, panels.len()));
            panels.push(right);
            let t = totals(&panels);
            value = t.0;
            abs_error = t.1;
        }
        Ok(QuadratureResult {
            value,
            abs_error_estimate: abs_error,
            panels_used: panels.len(),
        })
    }
}

/// `int_0^a f(r) dr`.
pub fn integrate_radial<F>(f: F, a: f64, rel_tol: f64) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    if !(a > 0.0) {
        return Err(Error::InvalidInput(format!("upper limit must be positive, got {a}")));
    }
    Quadrature::new(rel_tol)?.integrate(f, 0.0, a)
}

/// `int_0^L f(r) dr`, the truncation of an integral over `[0, inf)`.
pub fn integrate_extended<F>(f: F, tail_cut: f64, rel_tol: f64) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    if !(tail_cut > 0.0) {
        return Err(Error::InvalidInput(format!("tail cut must be positive, got {tail_cut}")));
    }
    Quadrature::new(rel_tol)?
        .with_max_panels(1_000_000)
        .integrate(f, 0.0, tail_cut)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

struct Worst(f64, usize);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Worst {}
impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        // larger error first; lower index breaks ties
        self.0
            .total_cmp(&other.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

fn totals(panels: &[Panel]) -> (f64, f64) {
    panels
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.err))
}

fn gk21<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Panel> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let sample = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::IntegrandDomain { at: x })
        }
    };

    let fc = sample(center)?;
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = WGK[10] * fc.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for i in 0..10 {
        let dx = half * XGK[i];
        let f1 = sample(center - dx)?;
        let f2 = sample(center + dx)?;
        fv1[i] = f1;
        fv2[i] = f2;
        res_k += WGK[i] * (f1 + f2);
        res_abs += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            res_g += WG[i / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for i in 0..10 {
        res_asc += WGK[i] * ((fv1[i] - mean).abs() + (fv2[i] - mean).abs());
    }

    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let roundoff = 4.0 * f64::EPSILON * res_abs;
    if roundoff > err {
        err = roundoff;
    }
    Ok(Panel { lo, hi, value, err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{bessel_j, lommel_first};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn trivial_integrals() {
        let r = integrate_radial(|r| r.sin().powi(2), PI, 1e-12).unwrap();
        assert!(rel(r.value, PI / 2.0) < 1e-12);
        let r = integrate_radial(|r| r * r, 1.0, 1e-12).unwrap();
        assert!(rel(r.value, 1.0 / 3.0) < 1e-14);
        assert!(r.panels_used >= 1 && r.abs_error_estimate >= 0.0);
    }

    #[test]
    fn oscillatory_lommel_case() {
        let f = |r: f64| {
            let j = bessel_j(0, 50.0 * r).unwrap();
            r * r * j * j
        };
        let q = Quadrature::new(1e-12).unwrap().with_wavenumber(50.0);
        let got = q.integrate(f, 0.0, 2.0).unwrap().value;
        assert!(rel(got, lommel_first(0, 50.0, 2.0).unwrap()) < 1e-10);
        // the plain entry point also gets there through refinement
        let plain = integrate_radial(f, 2.0, 1e-12).unwrap().value;
        assert!(rel(plain, lommel_first(0, 50.0, 2.0).unwrap()) < 1e-10);
    }

    #[test]
    fn extended_examples() {
        let r = integrate_extended(|r: f64| (-r).exp(), 100.0, 1e-12).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let r = integrate_extended(|r| bessel_j(0, r).unwrap().powi(2), 2000.0, 1e-10).unwrap();
        assert!(rel(r.value, PI / 2.0) < 1e-2);
        let r = integrate_extended(|r| bessel_j(2, 3.0 * r).unwrap().powi(2), 500.0, 1e-10).unwrap();
        assert!(rel(r.value, PI / 30.0) < 2e-2);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = integrate_radial(|r| if r > 0.5 { f64::NAN } else { r }, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, Error::IntegrandDomain { .. }));
    }

    #[test]
    fn panel_budget_exhaustion_carries_estimate() {
        let q = Quadrature::new(1e-14).unwrap().with_max_panels(3);
        let err = q.integrate(|r| (1.0 / (r + 1e-6)).sqrt(), 0.0, 1.0).unwrap_err();
        match err {
            Error::Convergence { estimate, panels, .. } => {
                assert!(estimate.is_finite());
                assert_eq!(panels, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in 1..12usize {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for deg in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn tolerance_range_is_enforced() {
        assert!(integrate_radial(|r| r, 1.0, 1e-16).is_err());
        assert!(integrate_radial(|r| r, 1.0, 1e-2).is_err());
        assert!(integrate_radial(|r| r, 0.0, 1e-8).is_err());
    }

    #[test]
    fn monotone_refinement_on_bessel_corpus() {
        let corpus: Vec<(u32, f64, f64)> = vec![(1, 1.0, 3.0), (2, 7.5, 2.0), (4, 0.3, 9.0), (6, 12.0, 1.5)];
        for (l, k, a) in corpus {
            let f = |r: f64| {
                let j = bessel_j(l, k * r).unwrap();
                let jj = bessel_j(l, 1.3 * k * r).unwrap();
                r * r * j * jj
            };
            let mut tol = 1e-4;
            let mut last = f64::INFINITY;
            while tol >= 1e-13 {
                let r = Quadrature::new(tol).unwrap().integrate(f, 0.0, a).unwrap();
                assert!(r.abs_error_estimate <= last, "l={l} tol={tol}");
                last = r.abs_error_estimate;
                tol /= 2.0;
            }
        }
    }
}
