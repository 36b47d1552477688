use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;

use sephier_core::derivation::{
    conglomerate_reduce, flow_field_sweep, flow_invariance_sweep, linearity_certificate, plain_sweep, sym_sweep,
    ResidualReport, Sweep, Verdict,
};
use sephier_core::evolution::{EvolutionError, EvolutionMap, Grid, GridState, Product};
use sephier_core::gauge::{apply_gauge, deformed_separation_gap, undeformed_separation_gap, Direction, GaugeParams};
use sephier_core::jetcore::JetSpec;
use sephier_core::opdsl::presets::DEFAULT_MAX_ARITY;
use sephier_core::opdsl::{Hierarchy, HierarchyDoc, HierarchyError};
use sephier_core::tensor::Statistics;

use crate::config::{Check, GridConfig, HierarchySource, RunConfig, StateConfig};
use crate::report::{Bound, CheckReport, CheckWitness, GaugeMeasure, ReplayOutcome, Report, Skipped, TraceRow};
use crate::{RunError, REPLAY_TOLERANCE};

/// A finished run: the report and the evolution trace rows.
#[derive(Clone, Debug)]
pub struct Run {
    pub report: Report,
    pub trace: Vec<TraceRow>,
}

/// Builds the hierarchy named by the config, with spec overrides applied.
pub fn build_hierarchy(config: &RunConfig) -> Result<Hierarchy, RunError> {
    let o = &config.spec;
    match &config.hierarchy {
        HierarchySource::File { file } => {
            let text = std::fs::read_to_string(file).map_err(|e| RunError::io(file, e))?;
            let mut doc: HierarchyDoc = serde_json::from_str(&text).map_err(|e| HierarchyError::Json(e.to_string()))?;
            doc.d = o.d.unwrap_or(doc.d);
            doc.k = o.k.unwrap_or(doc.k);
            doc.m = o.m.unwrap_or(doc.m);
            doc.f = o.f.unwrap_or(doc.f);
            Ok(Hierarchy::from_doc(&doc)?)
        }
        HierarchySource::Preset(preset) => {
            let spec =
                JetSpec::new(o.d.unwrap_or(1), o.k.unwrap_or(2), o.m.unwrap_or(1)).map_err(HierarchyError::from)?;
            let stats = Statistics::try_from(o.f.unwrap_or(0)).map_err(HierarchyError::from)?;
            Ok(preset.build(spec, stats, DEFAULT_MAX_ARITY.max(2 * config.particles))?)
        }
    }
}

/// Why `all` leaves a suite out for this hierarchy, if it does.
fn skip_reason(check: Check, hier: &Hierarchy, config: &RunConfig) -> Option<String> {
    let needs = |arities: &[usize]| arities.iter().copied().find(|&n| hier.operator(n).is_none());
    let missing = match check {
        Check::PlainDerivation | Check::SymDerivation | Check::FlowField => needs(&[1, 2]),
        Check::CertifyLinearity => needs(&[1]),
        Check::Conglomerate => needs(&[config.particles, 2 * config.particles]),
        Check::EvolveGap | Check::GaugeDemo => needs(&[1, 2]),
        Check::FlowInvariance | Check::All => None,
    };
    if let Some(n) = missing {
        return Some(format!("hierarchy lacks arity {n}"));
    }
    let spec = hier.spec();
    match check {
        Check::EvolveGap | Check::GaugeDemo if spec.d != 1 => {
            Some(format!("grid evolution needs d = 1, got {}", spec.d))
        }
        Check::GaugeDemo if spec.m != 1 => Some(format!("gauge demo needs m = 1, got {}", spec.m)),
        Check::GaugeDemo if hier.stats() == Statistics::Fermi => {
            Some("gauge demo needs f = 0: the antisymmetric product vanishes on the diagonal".into())
        }
        _ => None,
    }
}

/// Executes the configured suite. Checks run sequentially in a fixed order;
/// sweeps inside a check use the current rayon pool.
pub fn run(config: &RunConfig) -> Result<Run, RunError> {
    config.validate()?;
    let hier = build_hierarchy(config)?;
    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    let mut trace = Vec::new();
    let suites: Vec<Check> = match config.check {
        Check::All => Check::SUITES.to_vec(),
        c => vec![c],
    };
    for check in suites {
        if config.check == Check::All {
            if let Some(reason) = skip_reason(check, &hier, config) {
                skipped.push(Skipped { check: check.name().into(), reason });
                continue;
            }
        }
        run_check(check, &hier, config, &mut checks, &mut trace)?;
    }
    let pass = Report::all_pass(&checks);
    let report = Report {
        toolkit: "sephier".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        config: config.clone(),
        hierarchy: hier.to_doc(),
        checks,
        skipped,
        pass,
        exit_code: Report::exit_code_for(config.expect, pass),
    };
    Ok(Run { report, trace })
}

fn sweep_check(report: ResidualReport, started: Instant) -> CheckReport {
    CheckReport {
        name: report.check,
        samples: report.samples,
        value: report.max_residual,
        bound: Bound::Below,
        threshold: report.tolerance,
        pass: report.pass,
        exceed_count: Some(report.exceed_count),
        k_hat: None,
        verdict: verdict(report.pass).into(),
        witness: CheckWitness::Jet { witness: Box::new(report.witness) },
        wall_time_s: started.elapsed().as_secs_f64(),
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn run_check(
    check: Check,
    hier: &Hierarchy,
    config: &RunConfig,
    checks: &mut Vec<CheckReport>,
    trace: &mut Vec<TraceRow>,
) -> Result<(), RunError> {
    let started = Instant::now();
    let tolerance = config.tolerance_for(check);
    let sweep = Sweep::new(config.samples, config.seed, tolerance);
    match check {
        Check::PlainDerivation => checks.push(sweep_check(plain_sweep(hier, &sweep)?, started)),
        Check::SymDerivation => checks.push(sweep_check(sym_sweep(hier, &sweep)?, started)),
        Check::FlowInvariance => checks.push(sweep_check(flow_invariance_sweep(hier, &sweep)?, started)),
        Check::FlowField => checks.push(sweep_check(flow_field_sweep(hier, &sweep)?, started)),
        Check::Conglomerate => checks
            .push(sweep_check(conglomerate_reduce(hier, config.particles, &sweep, config.conglomerate_sign)?, started)),
        Check::CertifyLinearity => {
            let cert = linearity_certificate(hier, config.samples, config.seed, tolerance)?;
            let pass = cert.verdict == Verdict::LinearConsistent;
            let verdict = serde_json::to_value(cert.verdict).expect("verdict serializes");
            checks.push(CheckReport {
                name: check.name().into(),
                samples: cert.samples,
                value: cert.max_dev,
                bound: Bound::Below,
                threshold: cert.tolerance,
                pass,
                exceed_count: None,
                k_hat: Some(cert.k_hat),
                verdict: verdict.as_str().unwrap_or_default().into(),
                witness: CheckWitness::Jet { witness: Box::new(cert.witness) },
                wall_time_s: started.elapsed().as_secs_f64(),
            });
        }
        Check::EvolveGap => {
            let rows = evolve_gap_trace(hier, &config.grid, &config.states)?;
            let wall = started.elapsed().as_secs_f64();
            for product in [Product::Plain, Product::Sym] {
                let label = product_label(product);
                let value = rows.iter().rev().find(|r| r.product == label).expect("final row").gap;
                let pass = Bound::Below.holds(value, tolerance);
                checks.push(CheckReport {
                    name: format!("{check}/{label}"),
                    samples: 1,
                    value,
                    bound: Bound::Below,
                    threshold: tolerance,
                    pass,
                    exceed_count: None,
                    k_hat: None,
                    verdict: verdict(pass).into(),
                    witness: CheckWitness::Evolution { grid: config.grid, states: config.states, product },
                    wall_time_s: wall,
                });
            }
            trace.extend(rows);
        }
        Check::GaugeDemo => {
            let g = config.gauge;
            for (measure, bound, threshold) in [
                (GaugeMeasure::Deformed, Bound::Below, tolerance),
                (GaugeMeasure::Undeformed, Bound::Above, g.contrast),
                (GaugeMeasure::RoundTrip, Bound::Below, 1e-10),
            ] {
                let started = Instant::now();
                let witness = CheckWitness::Gauge {
                    grid: config.grid,
                    states: StateConfig { modulation: g.modulation },
                    gamma: g.gamma,
                    lambda: g.lambda,
                    measure,
                };
                let value = replay_witness(&witness, hier)?;
                let pass = bound.holds(value, threshold);
                let name = format!("{check}/{}", measure_label(measure));
                if measure != GaugeMeasure::RoundTrip {
                    trace.push(TraceRow {
                        check: check.name().into(),
                        product: measure_label(measure).into(),
                        step: config.grid.steps,
                        t: config.grid.steps as f64 * config.grid.dt,
                        gap: value,
                        norm: None,
                    });
                }
                checks.push(CheckReport {
                    name,
                    samples: 1,
                    value,
                    bound,
                    threshold,
                    pass,
                    exceed_count: None,
                    k_hat: None,
                    verdict: verdict(pass).into(),
                    witness,
                    wall_time_s: started.elapsed().as_secs_f64(),
                });
            }
        }
        Check::All => unreachable!("expanded by run"),
    }
    Ok(())
}

fn product_label(product: Product) -> &'static str {
    match product {
        Product::Plain => "plain",
        Product::Sym => "sym",
    }
}

fn measure_label(measure: GaugeMeasure) -> &'static str {
    match measure {
        GaugeMeasure::Deformed => "deformed",
        GaugeMeasure::Undeformed => "undeformed",
        GaugeMeasure::RoundTrip => "round-trip",
    }
}

/// `φ = 1 + a e^{ix}`, `ψ = 1 + a e^{-ix}`, normalized, in every internal
/// component.
fn test_pair(grid: &GridConfig, states: &StateConfig, internal: usize) -> Result<(GridState, GridState), RunError> {
    let g = Grid::new(grid.length, grid.n)?;
    let a = states.modulation;
    let wave = |sign: f64| {
        GridState::from_fn(g, internal, move |x, _| Complex64::new(1.0, 0.0) + Complex64::new(0.0, sign * x).exp() * a)
            .map(|s| s.normalized())
    };
    Ok((wave(1.0)?, wave(-1.0)?))
}

fn offset_step(e: EvolutionError, offset: usize) -> EvolutionError {
    match e {
        EvolutionError::AmplitudeFloor { step, point, amplitude } => {
            EvolutionError::AmplitudeFloor { step: step + offset, point, amplitude }
        }
        EvolutionError::Domain { step, point, source } => EvolutionError::Domain { step: step + offset, point, source },
        EvolutionError::Solver { step, residual } => EvolutionError::Solver { step: step + offset, residual },
        other => other,
    }
}

/// Separation gaps of the plain and symmetrized products at evenly spaced
/// checkpoints; the last rows are the gaps at `steps · dt`.
fn evolve_gap_trace(hier: &Hierarchy, grid: &GridConfig, states: &StateConfig) -> Result<Vec<TraceRow>, RunError> {
    let stats = hier.stats();
    let (mut phi, mut psi) = test_pair(grid, states, hier.spec().m)?;
    let mut plain = GridState::product(&phi, &psi, Product::Plain, stats)?;
    let mut sym = GridState::product(&phi, &psi, Product::Sym, stats)?;
    let emap = EvolutionMap::new(hier, grid.integrator, grid.dt, grid.steps)?;
    let mut rows = Vec::new();
    let mut done = 0;
    for j in 1..=grid.checkpoints.min(grid.steps) {
        let target = j * grid.steps / grid.checkpoints.min(grid.steps);
        let chunk = emap.with_steps(target - done);
        let evolve = |s: &GridState| chunk.evolve(s).map_err(|e| offset_step(e, done));
        let ((a, b), (c, d)) = rayon::join(
            || rayon::join(|| evolve(&phi), || evolve(&psi)),
            || rayon::join(|| evolve(&plain), || evolve(&sym)),
        );
        (phi, psi, plain, sym) = (a?, b?, c?, d?);
        done = target;
        for (product, whole) in [(Product::Plain, &plain), (Product::Sym, &sym)] {
            let parts = GridState::product(&phi, &psi, product, stats)?;
            let norm = whole.norm();
            rows.push(TraceRow {
                check: Check::EvolveGap.name().into(),
                product: product_label(product).into(),
                step: done,
                t: done as f64 * grid.dt,
                gap: whole.distance(&parts) / norm,
                norm: Some(norm),
            });
        }
    }
    Ok(rows)
}

fn replay_witness(witness: &CheckWitness, hier: &Hierarchy) -> Result<f64, RunError> {
    match witness {
        CheckWitness::Jet { witness } => Ok(witness.replay(hier)?),
        CheckWitness::Evolution { grid, states, product } => {
            let label = product_label(*product);
            let rows = evolve_gap_trace(hier, grid, states)?;
            Ok(rows.iter().rev().find(|r| r.product == label).expect("final row").gap)
        }
        CheckWitness::Gauge { grid, states, gamma, lambda, measure } => {
            let params = GaugeParams::new(*gamma, *lambda)?;
            let (phi, psi) = test_pair(grid, states, hier.spec().m)?;
            let t = grid.steps as f64 * grid.dt;
            Ok(match measure {
                GaugeMeasure::Deformed => deformed_separation_gap(&params, hier, &phi, &psi, t, grid.dt)?,
                GaugeMeasure::Undeformed => undeformed_separation_gap(&params, hier, &phi, &psi, t, grid.dt)?,
                GaugeMeasure::RoundTrip => {
                    let mut worst = 0.0_f64;
                    for chi in [&phi, &psi] {
                        let back =
                            apply_gauge(&params, &apply_gauge(&params, chi, Direction::Forward)?, Direction::Inverse)?;
                        worst = worst.max(back.distance(chi) / chi.norm());
                    }
                    worst
                }
            })
        }
    }
}

/// Re-evaluates every check's witness against the report's hierarchy.
pub fn replay(report: &Report) -> Result<Vec<ReplayOutcome>, RunError> {
    let hier = Hierarchy::from_doc(&report.hierarchy)?;
    report
        .checks
        .iter()
        .map(|c| {
            let replayed = replay_witness(&c.witness, &hier)?;
            let agree = (replayed - c.value).abs() <= REPLAY_TOLERANCE || replayed.to_bits() == c.value.to_bits();
            Ok(ReplayOutcome { name: c.name.clone(), reported: c.value, replayed, agree })
        })
        .collect()
}

/// Writes the trace rows as CSV.
pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<(), RunError> {
    let file = std::fs::File::create(path).map_err(|e| RunError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| RunError::io(path, e))?;
    Ok(())
}
