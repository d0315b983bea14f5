//! Sweep execution: points are computed concurrently, then gathered in grid order
//! and written from a single thread.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use floquet_kato::agpsolve::{hfe_kato, solve_drive};
use floquet_kato::drives::cylinder_edge_weight;
use floquet_kato::floquet::{classify_drive, solve_floquet, FloquetOptions};
use floquet_kato::kato::{berry_phases, kato_average, kato_decompose, kato_energies, state_grid, KatoOptions, KatoResult};
use floquet_kato::numkernel::{max_diff, wrap_phase};
use floquet_kato::parallel;
use floquet_kato::propagator::Integrator;
use floquet_kato::spectralflow::{parity_pairs, photon_index, track, BandPoint, TrackOptions};

use crate::config::{Computation, ExperimentConfig, SweepSpec};
use crate::error::CliError;
use crate::models::{self, Built};
use crate::table::{ResultTable, Row};

/// Rows nearest each cylinder edge counted as "edge".
const EDGE_WIDTH: usize = 3;
/// Tolerance for the drive-family flags.
const CLASSIFY_TOL: f64 = 1e-8;
/// Midpoints per period for the zeroth-order average of sampled drives.
const HFE_QUAD: usize = 256;

/// Where a value lands in the band column.
#[derive(Debug, Clone, Copy)]
enum Slot {
    /// A Floquet level; relabelled by band tracking when available.
    Level(usize),
    /// Written as-is (parity pairs, zeroth-order states).
    Index(usize),
    Scalar,
}

struct Value {
    comp: Computation,
    slot: Slot,
    quantity: &'static str,
    value: f64,
}

struct PointOut {
    values: Vec<Value>,
    band: Option<BandPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub failed_points: usize,
}

pub struct RunOptions {
    pub threads: usize,
    pub out: PathBuf,
    /// Fixed timestamp for reproducible metadata; `None` uses the clock.
    pub created: Option<u64>,
}

pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary, CliError> {
    crate::config::validate(cfg)?;
    std::fs::create_dir_all(&opts.out).map_err(|e| CliError::Io(format!("{}: {e}", opts.out.display())))?;
    let created = opts.created.unwrap_or_else(|| {
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    });
    let sweeps: Vec<SweepSpec> = if cfg.sweep.is_empty() {
        vec![SweepSpec { name: Some("point".into()), parameter: String::new(), start: 0.0, stop: 0.0, points: 1 }]
    } else {
        cfg.sweep.clone()
    };
    let mut summary = RunSummary { files: Vec::new(), failed_points: 0 };
    let mut errors = Vec::new();
    for s in &sweeps {
        let (tables, failures) = run_sweep(cfg, s, opts.threads)?;
        for t in &tables {
            summary.files.extend(t.write(&opts.out, &cfg.output.formats, created)?);
        }
        summary.failed_points += failures.len();
        errors.extend(failures.into_iter().map(|m| format!("{}: {m}", s.label())));
    }
    if errors.is_empty() {
        Ok(summary)
    } else {
        let err = CliError::Numeric(errors.join("; "));
        write_error(&opts.out, &err);
        Err(err)
    }
}

/// Best effort; the record is also printed to stderr by the caller.
pub fn write_error(dir: &Path, err: &CliError) {
    let _ = std::fs::write(dir.join("error.json"), err.record() + "\n");
}

fn run_sweep(cfg: &ExperimentConfig, s: &SweepSpec, threads: usize) -> Result<(Vec<ResultTable>, Vec<String>), CliError> {
    let info = models::lookup(&cfg.model.name).ok_or_else(|| CliError::Validation(cfg.model.name.clone()))?;
    let base = models::resolve(&info, &cfg.model.params, cfg.numerics.seed)?;
    let values = s.values();
    let idx: Vec<usize> = (0..values.len()).collect();
    let results = parallel::with_threads(threads, || {
        parallel::map(&idx, |&i| {
            let mut p = base.clone();
            if !s.parameter.is_empty() {
                p.insert(s.parameter.clone(), values[i]);
            }
            compute_point(cfg, &p, values[i]).map_err(|e| format!("point {i} ({}={}): {e}", s.parameter, values[i]))
        })
    });

    let mut failures = Vec::new();
    let mut ok: Vec<(usize, PointOut)> = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => ok.push((i, p)),
            Err(m) => failures.push(m),
        }
    }

    // band_of[k][level] for successful point k, from tracking when there is a sweep
    let mut relabel: Vec<Option<Vec<usize>>> = vec![None; ok.len()];
    let mut extra: Vec<Vec<Value>> = (0..ok.len()).map(|_| Vec::new()).collect();
    let mut ambiguous = 0;
    let bands: Vec<BandPoint> = ok.iter().filter_map(|(_, p)| p.band.clone()).collect();
    if bands.len() == ok.len() && !bands.is_empty() {
        let topts =
            TrackOptions { ambiguity: cfg.numerics.ambiguity, strict: cfg.numerics.strict_tracking, ..Default::default() };
        match track(&bands, &topts) {
            Ok(tr) => {
                ambiguous = tr.ambiguities.len();
                let photons = photon_index(&tr);
                for k in 0..tr.len() {
                    let mut inv = vec![0; tr.bands()];
                    for (b, &lvl) in tr.levels[k].iter().enumerate() {
                        inv[lvl] = b;
                    }
                    relabel[k] = Some(inv);
                    for b in 0..tr.bands() {
                        let lvl = tr.levels[k][b];
                        let ph = photons[k][b];
                        let kv = |quantity, value| Value { comp: Computation::Kato, slot: Slot::Level(lvl), quantity, value };
                        extra[k].push(kv("photon", ph.value as f64));
                        extra[k].push(kv("photon_resolved", if ph.resolved { 1.0 } else { 0.0 }));
                        extra[k].push(kv("track_overlap", tr.overlaps[k][b]));
                    }
                }
            }
            Err(e) => failures.push(format!("band tracking: {e}")),
        }
    }

    let mut meta = vec![
        ("version".to_string(), crate::VERSION.to_string()),
        ("model".to_string(), cfg.model.name.clone()),
        ("params".to_string(), fmt_params(&base)),
        (
            "sweep".to_string(),
            if s.parameter.is_empty() {
                "none".to_string()
            } else {
                format!("{}={}..{} ({} points)", s.parameter, s.start, s.stop, s.points)
            },
        ),
        ("seed".to_string(), base.get("seed").map_or("none".to_string(), |v| v.to_string())),
        ("status".to_string(), if failures.is_empty() { "complete".into() } else { "partial".into() }),
    ];
    if ambiguous > 0 {
        meta.push(("ambiguous_assignments".to_string(), ambiguous.to_string()));
    }

    let mut tables = Vec::new();
    for &comp in &cfg.compute {
        let mut m = meta.clone();
        m.insert(4, ("computation".to_string(), comp.name().to_string()));
        let mut t = ResultTable::new(format!("{}_{}", s.label(), comp.name()), m);
        for (k, (i, p)) in ok.iter().enumerate() {
            for v in p.values.iter().chain(&extra[k]).filter(|v| v.comp == comp) {
                let band = match v.slot {
                    Slot::Level(l) => relabel[k].as_ref().map_or(l, |r| r[l]) as i64,
                    Slot::Index(j) => j as i64,
                    Slot::Scalar => -1,
                };
                t.rows.push(Row { index: *i, parameter: values[*i], band, quantity: v.quantity, value: v.value });
            }
        }
        t.sort();
        tables.push(t);
    }
    Ok((tables, failures))
}

fn fmt_params(p: &BTreeMap<String, f64>) -> String {
    p.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

fn compute_point(cfg: &ExperimentConfig, params: &BTreeMap<String, f64>, x: f64) -> floquet_kato::Result<PointOut> {
    let built = models::build(&cfg.model.name, params)?;
    let d = &built.drive;
    let n = &cfg.numerics;
    let fopts = FloquetOptions {
        integrator: Integrator { steps: n.steps, adaptive: true, tol: n.refine_tol, max_steps: n.max_steps },
        micromotion_samples: 0,
        ..Default::default()
    };
    let sol = solve_floquet(d, 0.0, &fopts)?;
    let has = |c| cfg.compute.contains(&c);
    let mut values = Vec::new();
    let mut band = None;
    let mut push = |comp, slot, quantity, value| values.push(Value { comp, slot, quantity, value });

    if has(Computation::Floquet) {
        for (j, (&th, e)) in sol.theta.iter().zip(sol.quasienergies()).enumerate() {
            push(Computation::Floquet, Slot::Level(j), "theta", th);
            push(Computation::Floquet, Slot::Level(j), "quasienergy", e);
        }
        push(Computation::Floquet, Slot::Scalar, "steps", sol.steps as f64);
        push(Computation::Floquet, Slot::Scalar, "unresolved_degeneracy", sol.unresolved_degeneracy as u8 as f64);
    }

    let need_kato = has(Computation::Kato) || has(Computation::Classify) || has(Computation::Agpsolve);
    let mut kato: Option<KatoResult> = None;
    if need_kato {
        let samples = if has(Computation::Classify) || has(Computation::Agpsolve) { 32 } else { 0 };
        kato = Some(kato_decompose(d, &sol, &KatoOptions { samples: Some(samples), ..Default::default() })?);
    }

    if let (true, Some(k)) = (has(Computation::Kato), &kato) {
        kato_rows(&built, k, &mut push)?;
        band = Some(BandPoint::new(x, &sol, k));
    }

    if has(Computation::Berry) {
        let grid = state_grid(d, &sol, n.grid_points)?;
        let gamma = berry_phases(&grid)?;
        let curves = kato_energies(d, &grid)?;
        let avg = kato_average(&curves, &grid.times)?;
        let last = avg.last().cloned().unwrap_or_default();
        for (j, g) in gamma.iter().enumerate() {
            push(Computation::Berry, Slot::Level(j), "gamma_grid", *g);
        }
        for (j, xi) in last.iter().enumerate() {
            push(Computation::Berry, Slot::Level(j), "xi_grid", *xi);
        }
    }

    if has(Computation::Agpsolve) {
        let a = solve_drive(d, n.n_h, n.rank_tol)?;
        push(Computation::Agpsolve, Slot::Scalar, "residual", a.residual);
        push(Computation::Agpsolve, Slot::Scalar, "normal_residual", a.normal_residual);
        push(Computation::Agpsolve, Slot::Scalar, "rank", a.rank.rank as f64);
        push(Computation::Agpsolve, Slot::Scalar, "n_h", a.a_plus.n_h as f64);
        if let Some(k) = &kato {
            let mut dist: f64 = 0.0;
            for s in &k.samples {
                dist = dist.max(max_diff(a.kato_agp_at(s.t)?.as_ref(), s.a_k.as_ref()));
            }
            push(Computation::Agpsolve, Slot::Scalar, "distance_to_projector_agp", dist);
        }
    }

    if has(Computation::Hfe) {
        let h = hfe_kato(d, HFE_QUAD)?;
        for (j, xi) in h.xi_k0.iter().enumerate() {
            push(Computation::Hfe, Slot::Index(j), "xi_k0", *xi);
        }
    }

    if let (true, Some(k)) = (has(Computation::Classify), &kato) {
        let f = classify_drive(d, &sol, k, CLASSIFY_TOL)?;
        for (q, v) in [
            ("equilibrium", f.equilibrium),
            ("pure_micromotion", f.pure_micromotion),
            ("flat", f.flat),
            ("pure_geometric", f.pure_geometric),
        ] {
            push(Computation::Classify, Slot::Scalar, q, v as u8 as f64);
        }
    }
    Ok(PointOut { values, band })
}

fn kato_rows(
    built: &Built,
    k: &KatoResult,
    push: &mut impl FnMut(Computation, Slot, &'static str, f64),
) -> floquet_kato::Result<()> {
    let c = Computation::Kato;
    for j in 0..k.dim() {
        push(c, Slot::Level(j), "xi", k.xi[j]);
        push(c, Slot::Level(j), "gamma", k.gamma[j]);
        push(c, Slot::Level(j), "theta", k.theta[j]);
        if let Some(ly) = built.ly {
            let (lo, hi) = cylinder_edge_weight(k.states.col(j), ly, EDGE_WIDTH.min(ly));
            push(c, Slot::Level(j), "edge_lo", lo);
            push(c, Slot::Level(j), "edge_hi", hi);
        }
    }
    push(c, Slot::Scalar, "closure_min", k.closure_min);
    if let Some(par) = &built.parity {
        let pairs = parity_pairs(k.states.as_ref(), par.operator.as_ref(), par.coupling.as_ref())?;
        let mut rows: Vec<(f64, f64, f64)> = pairs
            .iter()
            .map(|p| {
                let dth = wrap_phase(k.theta[p.even] - k.theta[p.odd]).abs();
                let dg = wrap_phase(k.gamma[p.even] - k.gamma[p.odd]).abs();
                (dth, dg, (k.xi[p.even] - k.xi[p.odd]).abs())
            })
            .collect();
        // pairs listed by ascending mean Kato energy of the even member
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by(|&a, &b| k.xi[pairs[a].even].total_cmp(&k.xi[pairs[b].even]));
        rows = order.iter().map(|&i| rows[i]).collect();
        for (p, (dth, dg, dxi)) in rows.into_iter().enumerate() {
            push(c, Slot::Index(p), "pair_dtheta", dth);
            push(c, Slot::Index(p), "pair_dgamma", dg);
            push(c, Slot::Index(p), "pair_dxi", dxi);
        }
    }
    Ok(())
}
