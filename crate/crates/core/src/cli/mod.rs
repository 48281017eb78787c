//! Batch front-end: `verify`, `energies`, `sweep` and `tune`.
//!
//! Exit codes: 0 when every assertion passes, 1 on any violation, 2 on
//! input errors (nothing is written in that case).

pub mod config;
pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use crate::error::Error;
use crate::exec::{with_jobs, Execution};
use crate::model::{radial_integrals, ratio_from, source_energy, tuned_wavenumber, Mode, SourceSpec, TuningState};
use crate::quadrature::Quadrature;
use crate::theorems::{
    boundedness_margin, expansion_fd, expansion_j1, expansion_j2, f1_vanishing_check, in_expansion_regime,
    ExpansionCoeffs, UNIQUENESS_THRESHOLD,
};
use crate::tuning::{find_constraint_roots, select_chi0, Admissibility};

use config::{Axis, ConfigError, Format, LoadedConfig};
use report::{write_atomic, Check, Report, Value};

/// `|margin|` at `chi = 0` must stay below this fraction of the scale.
pub const EQUALITY_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "tuned-source", version, about = "Certify tuned minimum-energy source bounds on parameter grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Boundedness, minimality and expansion checks per (mode, chi) cell
    Verify(CommonArgs),
    /// Untuned and tuned source energies for the configured amplitudes
    Energies(CommonArgs),
    /// Long-format margins along one swept axis
    Sweep(CommonArgs),
    /// Zeros of the tabulated constraint and the selected multiplier
    Tune(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Relative quadrature tolerance
    #[arg(long)]
    pub tol_quad: Option<f64>,
    /// Boundedness margin tolerance, relative to the margin scale
    #[arg(long)]
    pub tol_margin: Option<f64>,
    /// Worker threads; 1 runs sequentially
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Io(std::io::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Input(e.to_string())
    }
}

/// Parse `args`, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (name, common) = match &cli.command {
        Command::Verify(c) => ("verify", c),
        Command::Energies(c) => ("energies", c),
        Command::Sweep(c) => ("sweep", c),
        Command::Tune(c) => ("tune", c),
    };
    match execute(name, common) {
        Ok(failures) => {
            if failures == 0 {
                0
            } else {
                eprintln!("{name}: {failures} assertion(s) failed");
                1
            }
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(name: &str, args: &CommonArgs) -> Result<usize, Failure> {
    let mut loaded = LoadedConfig::load(&args.config)?;
    if let Some(t) = args.tol_quad {
        Quadrature::new(t).map_err(|e| Failure::Input(format!("--tol-quad: {e}")))?;
        loaded.config.tolerances.quad_rel = t;
    }
    if let Some(t) = args.tol_margin {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::Input(format!("--tol-margin must be positive, got {t}")));
        }
        loaded.config.tolerances.margin = t;
    }
    if args.jobs == Some(0) {
        return Err(Failure::Input("--jobs must be >= 1".into()));
    }
    let format = args.format.or(loaded.config.output.format).unwrap_or(Format::Csv);
    let out = args.out.clone().or_else(|| loaded.config.output.path.clone());

    let report = with_jobs(args.jobs, |exec| match name {
        "verify" => verify(&loaded, exec),
        "energies" => energies(&loaded, exec),
        "sweep" => sweep(&loaded, exec),
        _ => tune(&loaded, exec),
    })?;
    let bytes = report.render(format).map_err(Failure::Io)?;
    match out {
        Some(path) => write_atomic(&path, &bytes).map_err(Failure::Io)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(Failure::Io)?;
        }
    }
    Ok(report.failures)
}

/// Per-mode expansion summary shared by every row of that mode.
#[derive(Debug, Clone)]
struct ModeSummary {
    f0: Option<f64>,
    f1_residual: Option<f64>,
    f1_fd: Option<f64>,
    f2_closed: Option<f64>,
    f2_fd: Option<f64>,
    f1_check: Check,
    f2_check: Check,
    note: String,
}

fn summarize_mode(mode: &Mode, k: f64, mu_omega: f64, a: f64, cfg: &LoadedConfig, quad: &Quadrature) -> ModeSummary {
    let tol = &cfg.config.tolerances;
    let l = mode.l();
    let mut s = ModeSummary {
        f0: None,
        f1_residual: None,
        f1_fd: None,
        f2_closed: None,
        f2_fd: None,
        f1_check: Check::Skip,
        f2_check: Check::Skip,
        note: String::new(),
    };
    let fd = match expansion_fd(mode, k, a, mu_omega, quad) {
        Ok(fd) => fd,
        Err(e) => {
            s.f1_check = Check::Fail;
            s.note = format!("expansion: {e}");
            return s;
        }
    };
    s.f1_fd = Some(fd.f1.abs() / fd.f0);
    s.f2_fd = fd.f2;
    let closed: Result<(ExpansionCoeffs, f64), Error> = match mode.j() {
        1 => f1_vanishing_check(l, k, a, mu_omega, tol.f1, quad)
            .and_then(|c| expansion_j1(l, k, a, mu_omega, quad).map(|e| (e, c.residual))),
        _ => expansion_j2(l, k, a, mu_omega).map(|e| (e, 0.0)),
    };
    match closed {
        Ok((c, residual)) => {
            s.f0 = Some(c.f0);
            s.f1_residual = Some(residual);
            s.f1_check = Check::from_bool(residual <= tol.f1 && fd.f1.abs() / fd.f0 <= tol.f1_fd);
            s.f2_closed = c.f2;
            if let (Some(c2), Some(d2)) = (c.f2, fd.f2) {
                s.f2_check = Check::from_bool((c2 - d2).abs() <= tol.f2 * d2.abs());
            }
        }
        Err(e) => {
            s.f1_check = Check::Fail;
            s.note = format!("expansion: {e}");
        }
    }
    s
}

const VERIFY_COLUMNS: &[&str] = &[
    "j",
    "l",
    "k",
    "K",
    "chi",
    "N_k",
    "N_K",
    "M",
    "boundedness_margin",
    "boundedness_scale",
    "minimality_margin",
    "minimality_scale",
    "f0",
    "f1_residual",
    "f1_fd_residual",
    "f2_closed",
    "f2_fd",
    "bounded_pass",
    "minimal_pass",
    "f1_pass",
    "f2_pass",
    "note",
];

fn verify(cfg: &LoadedConfig, exec: Execution) -> Result<Report, Failure> {
    let substrate = cfg.substrate()?;
    let modes = cfg.modes()?;
    let chi_block = cfg
        .config
        .chi
        .as_ref()
        .ok_or_else(|| cfg.error("chi", "verify needs a `chi` block"))?;
    let chis = cfg.chi_values(chi_block)?;
    let chi0 = chi_block.chi0;
    let quad = cfg.quadrature();
    let (k, mu_omega, a) = (substrate.k(), substrate.mu_omega(), substrate.a);
    let tol_margin = cfg.config.tolerances.margin;

    let summaries = exec.map(&modes, |m| summarize_mode(m, k, mu_omega, a, cfg, &quad));
    let cells: Vec<(usize, f64)> = (0..modes.len()).flat_map(|i| chis.iter().map(move |&c| (i, c))).collect();
    // ratio at the reference multiplier, once per mode
    let reference = exec.map(&modes, |m| {
        tuned_wavenumber(k, mu_omega, chi0).and_then(|t| {
            let ints = radial_integrals(m, k, t.k_tuned, a, &quad)?;
            ratio_from(m, &ints)
        })
    });
    let rows = exec.map(&cells, |&(i, chi)| {
        let mode = &modes[i];
        let s = &summaries[i];
        let base: Vec<Value> = vec![mode.j().into(), mode.l().into(), k.into()];
        let rep = match boundedness_margin(mode, k, chi, mu_omega, a, &quad) {
            Ok(rep) => rep,
            Err(e) => {
                let check = match e {
                    Error::Evanescent { .. } => Check::Skip,
                    _ => Check::Fail,
                };
                let mut row = base;
                row.push(Value::Empty);
                row.push(chi.into());
                row.extend((0..7).map(|_| Value::Empty));
                row.extend(expansion_cells(s));
                row.extend([check.into(), Check::Skip.into(), s.f1_check.into(), s.f2_check.into()]);
                row.push(e.to_string().into());
                return (row, vec![check, s.f1_check, s.f2_check]);
            }
        };
        let ints = rep.integrals.expect("boundedness report carries integrals");
        let mut bounded = rep.margin >= -tol_margin * rep.scale;
        if chi == 0.0 {
            bounded &= rep.margin.abs() <= EQUALITY_TOL * rep.scale;
        }
        let bounded = Check::from_bool(bounded);
        let mut note = s.note.clone();
        if chi != 0.0 && rep.margin.abs() <= EQUALITY_TOL * rep.scale {
            if !note.is_empty() {
                note.push_str("; ");
            }
            note.push_str("boundedness equality at nonzero chi");
        }
        let (min_margin, min_scale, minimal) = match (&reference[i], &ratio_from(mode, &ints)) {
            (Ok(r0), Ok(r)) => {
                let r = *r;
                let margin = if chi == chi0 { 0.0 } else { r - r0 };
                let check = if !in_expansion_regime(chi, k, mu_omega) || !in_expansion_regime(chi0, k, mu_omega) {
                    Check::Skip
                } else if chi * chi > chi0 * chi0 {
                    Check::from_bool(margin > UNIQUENESS_THRESHOLD * r0)
                } else if chi == chi0 {
                    Check::Pass
                } else {
                    Check::Skip
                };
                (Some(margin), Some(*r0), check)
            }
            (Err(e), _) | (_, Err(e)) => {
                if !note.is_empty() {
                    note.push_str("; ");
                }
                note.push_str(&format!("minimality: {e}"));
                (None, None, Check::Fail)
            }
        };
        let mut row = base;
        row.extend([
            rep.k_tuned.into(),
            chi.into(),
            ints.n_self_k.into(),
            ints.n_self_tuned.into(),
            ints.m_cross.into(),
            rep.margin.into(),
            rep.scale.into(),
            min_margin.into(),
            min_scale.into(),
        ]);
        row.extend(expansion_cells(s));
        row.extend([bounded.into(), minimal.into(), s.f1_check.into(), s.f2_check.into()]);
        row.push(note.into());
        (row, vec![bounded, minimal, s.f1_check, s.f2_check])
    });
    let mut report = Report::new("verify", VERIFY_COLUMNS);
    for (row, checks) in rows {
        report.push(row, &checks);
    }
    Ok(report)
}

fn expansion_cells(s: &ModeSummary) -> [Value; 5] {
    [
        s.f0.into(),
        s.f1_residual.into(),
        s.f1_fd.into(),
        s.f2_closed.into(),
        s.f2_fd.into(),
    ]
}

const ENERGY_COLUMNS: &[&str] = &[
    "kind",
    "chi",
    "K",
    "E_untuned",
    "E_tuned",
    "difference",
    "predicted_difference",
    "pass",
    "note",
];

fn energies(cfg: &LoadedConfig, exec: Execution) -> Result<Report, Failure> {
    let substrate = cfg.substrate()?;
    let quad = cfg.quadrature();
    let tol_margin = cfg.config.tolerances.margin;
    let mut spec = SourceSpec::new();
    for (i, s) in cfg.config.sources.iter().enumerate() {
        let mode = Mode::new(s.j, s.l, s.m).map_err(|e| cfg.error(&format!("sources[{i}]"), e.to_string()))?;
        spec.insert(mode, Complex64::new(s.re, s.im))
            .map_err(|e| cfg.error(&format!("sources[{i}]"), e.to_string()))?;
    }
    let mut targets: Vec<(&'static str, f64)> = Vec::new();
    if let Some(chi) = &cfg.config.chi {
        targets.extend(cfg.chi_values(chi)?.into_iter().map(|c| ("tuned", c)));
    }
    let mut diagnostics: Vec<(&'static str, Option<f64>, String)> = Vec::new();
    if let Some(xi) = &cfg.config.xi_search {
        let (search, table) = cfg.xi_search(xi)?;
        let adm = Admissibility {
            k: substrate.k(),
            mu_omega: substrate.mu_omega(),
        };
        match find_constraint_roots(|c| table.eval(c), &search, Some(adm), exec).and_then(|set| select_chi0(&set)) {
            Ok(c) => targets.push(("chi0", c)),
            Err(e) => diagnostics.push(("chi0", None, e.to_string())),
        }
    }
    if targets.is_empty() && diagnostics.is_empty() {
        return Err(cfg.error("chi", "energies needs a `chi` block or an `xi_search` block").into());
    }

    let (k, mu_omega, a) = (substrate.k(), substrate.mu_omega(), substrate.a);
    let untuned_state = TuningState::for_substrate(&substrate, 0.0).map_err(|e| Failure::Input(e.to_string()))?;
    let untuned = spec
        .coefficients(&substrate, &untuned_state, &quad)
        .and_then(|c| source_energy(&spec, &c));
    // f2 per (j, l) for the lowest-order prediction
    let orders: Vec<Mode> = {
        let mut seen = BTreeMap::new();
        for m in spec.amplitudes().keys() {
            seen.entry((m.j(), m.l())).or_insert(*m);
        }
        seen.into_values().collect()
    };
    let f2s: Vec<Option<f64>> = exec.map(&orders, |m| match m.j() {
        2 => expansion_j2(m.l(), k, a, mu_omega).ok().and_then(|c| c.f2),
        _ => expansion_fd(m, k, a, mu_omega, &quad).ok().and_then(|c| c.f2),
    });
    let f2_by_order: BTreeMap<(u8, u32), Option<f64>> =
        orders.iter().map(|m| (m.j(), m.l())).zip(f2s).collect();

    let rows = exec.map(&targets, |&(kind, chi)| {
        let state = TuningState::for_substrate(&substrate, chi);
        let tuned = state
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|t| spec.coefficients(&substrate, t, &quad))
            .and_then(|c| source_energy(&spec, &c));
        let predicted: Option<f64> = spec
            .amplitudes()
            .iter()
            .map(|(m, amp)| f2_by_order[&(m.j(), m.l())].map(|f2| f2 * chi * chi * amp.norm_sqr()))
            .sum();
        let k_tuned: Option<f64> = state.as_ref().ok().map(|t| t.k_tuned);
        match (&untuned, &tuned) {
            (Ok(e0), Ok(e)) => {
                let e = *e;
                let pass = Check::from_bool(*e0 <= e + tol_margin * e0.abs());
                let row: Vec<Value> = vec![
                    kind.into(),
                    chi.into(),
                    k_tuned.into(),
                    (*e0).into(),
                    e.into(),
                    (e - e0).into(),
                    predicted.into(),
                    pass.into(),
                    "".into(),
                ];
                (row, pass)
            }
            (Err(e), _) | (_, Err(e)) => {
                let check = match e {
                    Error::Evanescent { .. } => Check::Skip,
                    _ => Check::Fail,
                };
                let row: Vec<Value> = vec![
                    kind.into(),
                    chi.into(),
                    k_tuned.into(),
                    untuned.as_ref().ok().copied().into(),
                    Value::Empty,
                    Value::Empty,
                    predicted.into(),
                    check.into(),
                    e.to_string().into(),
                ];
                (row, check)
            }
        }
    });
    let mut report = Report::new("energies", ENERGY_COLUMNS);
    for (row, check) in rows {
        report.push(row, &[check]);
    }
    for (kind, chi, note) in diagnostics {
        let row: Vec<Value> = vec![
            kind.into(),
            chi.into(),
            Value::Empty,
            untuned.as_ref().ok().copied().into(),
            Value::Empty,
            Value::Empty,
            Value::Empty,
            Check::Skip.into(),
            note.into(),
        ];
        report.push(row, &[Check::Skip]);
    }
    Ok(report)
}

const SWEEP_COLUMNS: &[&str] = &[
    "axis",
    "value",
    "j",
    "l",
    "k",
    "K",
    "a",
    "chi",
    "ka",
    "Ka",
    "boundedness_rel",
    "minimality_rel",
    "bounded_pass",
    "minimal_pass",
    "note",
];

#[derive(Debug, Clone, Copy)]
struct SweepCell {
    value: f64,
    mode: Mode,
    k: f64,
    a: f64,
    chi: f64,
    chi0: f64,
}

fn sweep(cfg: &LoadedConfig, exec: Execution) -> Result<Report, Failure> {
    let substrate = cfg.substrate()?;
    let sw = cfg
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| cfg.error("sweep", "sweep needs a `sweep` block"))?;
    let (chis, chi0) = match &cfg.config.chi {
        Some(c) => (cfg.chi_values(c)?, c.chi0),
        None => (vec![0.0], 0.0),
    };
    let modes = cfg.modes()?;
    let mut js: Vec<u8> = modes.iter().map(|m| m.j()).collect();
    js.dedup();
    let (k_ref, a_ref, mu_omega) = (substrate.k(), substrate.a, substrate.mu_omega());
    let tol_margin = cfg.config.tolerances.margin;

    let mut cells = Vec::new();
    for &value in &sw.values {
        let (k, a, scale2) = match sw.axis {
            Axis::K => (value, a_ref, 1.0),
            Axis::A if sw.hold_ka => (k_ref * a_ref / value, value, (a_ref / value).powi(2)),
            Axis::A => (k_ref, value, 1.0),
            Axis::Chi | Axis::L => (k_ref, a_ref, 1.0),
        };
        let cell_modes: Vec<Mode> = match sw.axis {
            Axis::L => js.iter().map(|&j| Mode::new(j, value as u32, 0)).collect::<Result<_, _>>()
                .map_err(|e| cfg.error("sweep.values", e.to_string()))?,
            _ => modes.clone(),
        };
        let cell_chis: Vec<f64> = match sw.axis {
            Axis::Chi => vec![value],
            _ => chis.iter().map(|c| c * scale2).collect(),
        };
        for mode in cell_modes {
            for &chi in &cell_chis {
                cells.push(SweepCell {
                    value,
                    mode,
                    k,
                    a,
                    chi,
                    chi0: chi0 * scale2,
                });
            }
        }
    }
    let quad = cfg.quadrature();
    let axis_name = match sw.axis {
        Axis::Chi => "chi",
        Axis::K => "k",
        Axis::A => "a",
        Axis::L => "l",
    };
    let rows = exec.map(&cells, |c| {
        let head: Vec<Value> = vec![
            axis_name.into(),
            c.value.into(),
            c.mode.j().into(),
            c.mode.l().into(),
            c.k.into(),
        ];
        let result = boundedness_margin(&c.mode, c.k, c.chi, mu_omega, c.a, &quad).and_then(|b| {
            let ints = b.integrals.expect("boundedness report carries integrals");
            let r = ratio_from(&c.mode, &ints)?;
            let t0 = tuned_wavenumber(c.k, mu_omega, c.chi0)?;
            let r0 = ratio_from(&c.mode, &radial_integrals(&c.mode, c.k, t0.k_tuned, c.a, &quad)?)?;
            let m = if c.chi == c.chi0 { 0.0 } else { r - r0 };
            Ok((b, m / r0))
        });
        match result {
            Ok((b, min_rel)) => {
                let mut ok = b.margin >= -tol_margin * b.scale;
                if c.chi == 0.0 {
                    ok &= b.margin.abs() <= EQUALITY_TOL * b.scale;
                }
                let bounded = Check::from_bool(ok);
                let minimal = if in_expansion_regime(c.chi, c.k, mu_omega)
                    && in_expansion_regime(c.chi0, c.k, mu_omega)
                    && c.chi * c.chi > c.chi0 * c.chi0
                {
                    Check::from_bool(min_rel > UNIQUENESS_THRESHOLD)
                } else {
                    Check::Skip
                };
                let mut row = head;
                row.extend([
                    b.k_tuned.into(),
                    c.a.into(),
                    c.chi.into(),
                    (c.k * c.a).into(),
                    (b.k_tuned * c.a).into(),
                    b.relative().into(),
                    min_rel.into(),
                    bounded.into(),
                    minimal.into(),
                    "".into(),
                ]);
                (row, vec![bounded, minimal])
            }
            Err(e) => {
                let check = match e {
                    Error::Evanescent { .. } => Check::Skip,
                    _ => Check::Fail,
                };
                let mut row = head;
                row.extend([
                    Value::Empty,
                    c.a.into(),
                    c.chi.into(),
                    (c.k * c.a).into(),
                    Value::Empty,
                    Value::Empty,
                    Value::Empty,
                    check.into(),
                    Check::Skip.into(),
                    e.to_string().into(),
                ]);
                (row, vec![check])
            }
        }
    });
    let mut report = Report::new("sweep", SWEEP_COLUMNS);
    for (row, checks) in rows {
        report.push(row, &checks);
    }
    Ok(report)
}

const TUNE_COLUMNS: &[&str] = &["kind", "chi", "K", "note"];

fn tune(cfg: &LoadedConfig, exec: Execution) -> Result<Report, Failure> {
    let substrate = cfg.substrate()?;
    let xi = cfg
        .config
        .xi_search
        .as_ref()
        .ok_or_else(|| cfg.error("xi_search", "tune needs an `xi_search` block"))?;
    let (search, table) = cfg.xi_search(xi)?;
    let (k, mu_omega) = (substrate.k(), substrate.mu_omega());
    let adm = Admissibility { k, mu_omega };
    let set = find_constraint_roots(|c| table.eval(c), &search, Some(adm), exec)
        .map_err(|e| Failure::Input(format!("xi_search.table: {e}")))?;
    let mut report = Report::new("tune", TUNE_COLUMNS);
    let k_of = |chi: f64| -> Value { tuned_wavenumber(k, mu_omega, chi).ok().map(|t| t.k_tuned).into() };
    for &r in set.roots() {
        report.push(vec!["root".into(), r.into(), k_of(r), "".into()], &[]);
    }
    for &r in set.rejected() {
        report.push(
            vec!["rejected".into(), r.into(), Value::Empty, "chi mu omega >= k^2".into()],
            &[],
        );
    }
    match select_chi0(&set) {
        Ok(c) => report.push(vec!["chi0".into(), c.into(), k_of(c), "".into()], &[Check::Pass]),
        Err(e) => report.push(
            vec!["chi0".into(), Value::Empty, Value::Empty, e.to_string().into()],
            &[Check::Fail],
        ),
    }
    Ok(report)
}
