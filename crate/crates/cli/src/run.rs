//! Scenario execution.

use std::collections::BTreeMap;
use std::time::Instant;

use polydisc_core::criteria::{
    beurling_residual, cross_commutator_residual, xij_residual, commutator_contraction,
};
use polydisc_core::generators::nilpotent_brehmer_pairs;
use polydisc_core::io;
use polydisc_core::kernel::sample_kernel_points;
use polydisc_core::{
    beurling_submodule_check, bidisc_example_suite, canonical_dilation, constancy_check,
    default_hats, identity_suite, innerness_check, invariant_subspace_from_factorization,
    model_correspondence, pureness_check, quotient_data, submodule_projection, AnalyticSymbol,
    CMatrix, ContractionTuple, CriterionReport, Margins, ModelInput, QuotientData, SubspaceData,
    TruncationGrid,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::report::{Report, ToleranceEcho, VERSION};
use crate::scenario::{
    Command, NamedSubspace, Scenario, SubspaceSource, SymbolSource, TupleSource,
};

enum Failure {
    Input(String),
    Domain(polydisc_core::Error),
}

impl From<polydisc_core::Error> for Failure {
    fn from(e: polydisc_core::Error) -> Self {
        Failure::Domain(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

struct Output {
    checks: CriterionReport,
    details: BTreeMap<String, Value>,
}

impl Output {
    fn new(tol: f64) -> Self {
        Self {
            checks: CriterionReport::new(tol),
            details: BTreeMap::new(),
        }
    }

    /// Copies residuals (re-judged at this tolerance) and diagnostics.
    fn merge(&mut self, other: &CriterionReport) {
        for (k, v) in &other.residuals {
            self.checks.record(k, *v);
        }
        for (k, v) in &other.diagnostics {
            self.checks.diagnostic(k, *v);
        }
    }
}

fn read_file(path: &std::path::Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_symbol(src: &SymbolSource) -> Outcome<AnalyticSymbol> {
    match src {
        SymbolSource::Inline(s) => Ok(s.clone()),
        SymbolSource::File(path) => io::parse_symbol(&read_file(path)?)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display()))),
    }
}

fn caps(s: &Scenario) -> Outcome<Vec<usize>> {
    s.caps
        .clone()
        .ok_or_else(|| Failure::Input(format!("{} needs grid caps", s.command.name())))
}

fn symbol_margins(s: &Scenario, symbol: &AnalyticSymbol) -> Margins {
    let m = Margins::for_symbol(symbol, s.margin.clone());
    match s.headroom {
        Some(h) => m.with_headroom(h),
        None => m,
    }
}

fn basis_margins(s: &Scenario, nvars: usize, window: usize) -> Margins {
    let m = Margins::for_basis(nvars, window);
    match s.headroom {
        Some(h) => m.with_headroom(h),
        None => m,
    }
}

/// The submodule of the scenario, with its symbol when it has one.
fn submodule(s: &Scenario, out: &mut Output) -> Outcome<(SubspaceData, Option<AnalyticSymbol>)> {
    let cfg = &s.config;
    match s.subspace.as_ref() {
        Some(SubspaceSource::Symbol(src)) => {
            let symbol = load_symbol(src)?;
            let grid = TruncationGrid::new(caps(s)?, symbol.rows())?;
            let margins = symbol_margins(s, &symbol);
            let inner = innerness_check(&symbol, &grid, cfg.torus_samples, &margins, cfg.tol)?;
            out.checks.diagnostic("torus_deviation", inner.torus_deviation);
            out.checks.diagnostic("isometry_defect", inner.isometry_defect);
            let sub = submodule_projection(&symbol, &grid, &margins, cfg)?;
            Ok((sub, Some(symbol)))
        }
        Some(SubspaceSource::Named(named)) => {
            let grid = TruncationGrid::new(caps(s)?, 1)?;
            let n = grid.nvars();
            let sub = match named {
                NamedSubspace::VanishingAtOrigin => {
                    SubspaceData::vanishing_at_origin(grid, basis_margins(s, n, s.window))?
                }
                NamedSubspace::MixedPowers => {
                    if n != 2 {
                        return Err(Failure::Input("mixed-powers lives on the bidisc".into()));
                    }
                    SubspaceData::monomial_span(grid, basis_margins(s, n, s.window.max(2)), |k| {
                        k.get(0) >= 2 || k.get(1) >= 1
                    })?
                }
            };
            Ok((sub, None))
        }
        Some(SubspaceSource::BasisFile(path)) => {
            let (grid, cols) = io::parse_basis(&read_file(path)?)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            if let Some(c) = &s.caps {
                if c.as_slice() != grid.caps() {
                    return Err(Failure::Input(format!(
                        "caps {:?} differ from the basis file caps {:?}",
                        c,
                        grid.caps()
                    )));
                }
            }
            let n = grid.nvars();
            let sub = SubspaceData::from_columns(
                grid,
                &cols,
                basis_margins(s, n, s.window),
                s.config.rank_tol,
            )?;
            Ok((sub, None))
        }
        None => Err(Failure::Input("no symbol or subspace given".into())),
    }
}

fn quotient(s: &Scenario, out: &mut Output) -> Outcome<QuotientData> {
    let (sub, _) = submodule(s, out)?;
    let q = quotient_data(&sub, &s.config)?;
    out.checks.diagnostic("submodule_rank", sub.rank() as f64);
    out.checks.diagnostic("quotient_rank", q.quotient.rank() as f64);
    for (k, v) in &q.diagnostics {
        out.checks.diagnostic(k, *v);
    }
    Ok(q)
}

fn check_beurling(s: &Scenario, out: &mut Output) -> Outcome<()> {
    let q = quotient(s, out)?;
    let tol = s.config.tol;
    let b = beurling_residual(&q.frame);
    let c = cross_commutator_residual(&q.frame);
    let x = xij_residual(&q.frame);
    out.checks.record("beurling", b);
    out.checks.record("cross_commutator", c);
    out.checks.record("xij", x);
    let verdicts = [b <= tol, c <= tol, x <= tol];
    let agree = verdicts.iter().all(|v| *v == verdicts[0]);
    out.checks.record("agreement", if agree { 0.0 } else { 1.0 });
    Ok(())
}

fn identity_checks(s: &Scenario, out: &mut Output) -> Outcome<()> {
    let q = quotient(s, out)?;
    let n = q.frame.nvars();
    let hats = default_hats(n);
    out.merge(&identity_suite(&q, &hats, s.config.tol)?);
    let mut residual: f64 = 0.0;
    let mut norm: f64 = 0.0;
    for (i, list) in hats.iter().enumerate() {
        for k in list {
            let c = commutator_contraction(&q, i, k, s.config.rank_tol)?;
            residual = residual.max(c.factorization_residual);
            norm = norm.max(c.norm);
        }
    }
    out.checks.record("commutator_contraction", residual);
    out.checks.record("commutator_contraction_excess", (norm - 1.0).max(0.0));
    out.checks.diagnostic("commutator_contraction_norm", norm);
    Ok(())
}

fn load_tuple(s: &Scenario) -> Outcome<ContractionTuple> {
    let ops: Vec<CMatrix> = match s.tuple.as_ref() {
        Some(TupleSource::Inline(ops)) => ops.clone(),
        Some(TupleSource::File(path)) => io::parse_tuple(&read_file(path)?)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?,
        Some(TupleSource::Nilpotent(index)) => {
            let pairs = nilpotent_brehmer_pairs(s.seed, index + 1, 4, &s.config)?;
            pairs[*index].ops.clone()
        }
        Some(TupleSource::Quotient) | None => {
            return Err(Failure::Input("no explicit tuple given".into()))
        }
    };
    Ok(ContractionTuple::new(ops, s.config.tol)?)
}

fn tuple_details(t: &ContractionTuple) -> Value {
    let ops: Vec<Value> = t
        .ops()
        .iter()
        .map(|m| {
            Value::Array(
                (0..m.nrows())
                    .map(|r| {
                        Value::Array(
                            (0..m.ncols()).map(|c| json!([m[(r, c)].re, m[(r, c)].im])).collect(),
                        )
                    })
                    .collect(),
            )
        })
        .collect();
    Value::Array(ops)
}

fn check_brehmer(s: &Scenario, out: &mut Output) -> Outcome<()> {
    let report = match s.tuple {
        Some(TupleSource::Quotient) | None => {
            let q = quotient(s, out)?;
            model_correspondence(ModelInput::Quotient(&q), &s.config)?
        }
        _ => {
            let t = load_tuple(s)?;
            for (i, op) in t.ops().iter().enumerate() {
                let v = pureness_check(op, s.max_power, s.config.tol);
                out.checks.diagnostic(&format!("spectral_radius.T{}", i + 1), v.spectral_radius);
            }
            out.details.insert("tuple".into(), tuple_details(&t));
            model_correspondence(ModelInput::Tuple(&t), &s.config)?
        }
    };
    out.merge(&report);
    Ok(())
}

fn dilate(s: &Scenario, out: &mut Output) -> Outcome<()> {
    let t = load_tuple(s)?;
    let caps = caps(s)?;
    let d = canonical_dilation(&t, &caps, &s.config)?;
    out.checks.record("isometry", d.isometry_residual);
    out.checks.record("intertwining", d.intertwining_residual);
    out.checks.record("compression", d.compression_residual);
    out.checks.diagnostic("tail_mass", d.tail_mass);
    out.checks.diagnostic("defect_rank", d.defect.rank() as f64);
    out.checks.diagnostic("defect_min_eigenvalue", d.defect.min_eigenvalue);
    out.checks.diagnostic("dilation_dim", d.grid.dim() as f64);
    Ok(())
}

fn symbol_details(symbol: &AnalyticSymbol) -> Value {
    let terms: Vec<Value> = symbol
        .coefficients()
        .iter()
        .filter(|(_, m)| m.iter().any(|z| z.norm() > 0.0))
        .map(|(k, m)| {
            let rows: Vec<Value> = (0..m.nrows())
                .map(|r| {
                    Value::Array((0..m.ncols()).map(|c| json!([m[(r, c)].re, m[(r, c)].im])).collect())
                })
                .collect();
            json!({ "k": k.entries(), "coefficient": rows })
        })
        .collect();
    Value::Array(terms)
}

fn factor(s: &Scenario, out: &mut Output) -> Outcome<()> {
    let theta = match s.subspace.as_ref() {
        Some(SubspaceSource::Symbol(src)) => load_symbol(src)?,
        _ => return Err(Failure::Input("factor needs a symbol".into())),
    };
    let phi = match s.divisor.as_ref() {
        Some(src) => load_symbol(src)?,
        None => return Err(Failure::Input("factor needs a divisor".into())),
    };
    let grid = TruncationGrid::new(caps(s)?, theta.rows())?;
    let w = invariant_subspace_from_factorization(&theta, &phi, &grid, &s.config)?;
    for (k, v) in &w.residuals {
        out.checks.record(k, *v);
    }
    out.checks.diagnostic("m_rank", w.m_basis.rank() as f64);
    let margins = symbol_margins(s, &theta);
    let module = beurling_submodule_check(&w.m_basis, &theta, &margins, &s.config)?;
    out.checks.absorb("module", &module);
    let psi_grid = TruncationGrid::new(grid.caps().to_vec(), w.psi.rows())?;
    let psi_margins = Margins::for_symbol(&w.psi, None);
    let constancy = constancy_check(&w.psi, &psi_grid, &psi_margins, &s.config)?;
    out.checks
        .diagnostic("psi_max_nonconstant_coefficient", constancy.max_nonconstant_coefficient);
    out.checks
        .diagnostic("psi_surjectivity_residual", constancy.surjectivity_residual);
    out.details.insert("psi".into(), symbol_details(&w.psi));
    out.details.insert(
        "psi_is_unitary_constant".into(),
        Value::Bool(constancy.is_unitary_constant()),
    );
    Ok(())
}

fn bidisc_example(s: &Scenario, out: &mut Output) -> Outcome<()> {
    let pairs = sample_kernel_points(s.seed, s.pairs, s.pair_radius);
    let r = bidisc_example_suite(&s.bidisc, &pairs, &s.config)?;
    out.merge(&r.checks);
    out.details.insert(
        "witness".into(),
        serde_json::to_value(&r.witness).expect("witness serializes"),
    );
    out.details.insert(
        "ranks".into(),
        serde_json::to_value(&r.ranks).expect("ranks serialize"),
    );
    out.details.insert("inconclusive".into(), Value::Bool(r.inconclusive));
    Ok(())
}

/// Runs one scenario. Domain failures become an `error` status, never a panic.
pub fn run_scenario(s: &Scenario, timing: bool) -> Report {
    let start = Instant::now();
    let mut out = Output::new(s.config.tol);
    let result = match s.command {
        Command::CheckBeurling => check_beurling(s, &mut out),
        Command::IdentitySuite => identity_checks(s, &mut out),
        Command::CheckBrehmer => check_brehmer(s, &mut out),
        Command::Dilate => dilate(s, &mut out),
        Command::Factor => factor(s, &mut out),
        Command::BidiscExample => bidisc_example(s, &mut out),
    };
    let status = match result {
        Ok(()) => "ok".to_string(),
        Err(Failure::Domain(e)) => format!("error: {e}"),
        Err(Failure::Input(m)) => format!("input error: {m}"),
    };
    let mut report = Report {
        id: s.id.clone(),
        command: s.command.name().to_string(),
        grid: s.caps.clone(),
        tolerance: ToleranceEcho {
            tol: s.config.tol,
            rank_tol: s.config.rank_tol,
            psd_tol: s.config.psd_tol,
            invariance_tol: s.config.invariance_tol,
        },
        seed: s.seed,
        status,
        residuals: out.checks.residuals,
        verdicts: out.checks.verdicts,
        diagnostics: out.checks.diagnostics,
        details: out.details,
        mismatches: Vec::new(),
        runtime_seconds: timing.then(|| start.elapsed().as_secs_f64()),
        version: VERSION.to_string(),
    };
    report.check_expectation(&s.expect);
    report
}

/// Runs scenarios concurrently; reports come back in input order.
pub fn run_batch(scenarios: &[Scenario], timing: bool) -> Vec<Report> {
    scenarios.par_iter().map(|s| run_scenario(s, timing)).collect()
}
