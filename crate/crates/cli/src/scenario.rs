//! Scenario files.
//!
//! Grammar (shared with the core text formats): `#` comments, `key = value`
//! fields, and `begin <label>` … `end` blocks.
//!
//! Fields:
//!
//! | key | meaning |
//! |---|---|
//! | `id` | report identifier (defaults to the file stem) |
//! | `command` | `check-beurling`, `check-brehmer`, `dilate`, `factor`, `example42`, `identity-suite` |
//! | `caps` | grid caps `d₁,…,dₙ` |
//! | `tol`, `rank_tol`, `psd_tol`, `invariance_tol` | thresholds (`tol` defaults to 1e-8) |
//! | `torus_samples` | innerness samples per axis |
//! | `seed` | RNG seed (default 0) |
//! | `symbol` | inline symbol: factors joined by `*`, each `monomial k₁,…,kₙ`, `blaschke <var> <re> <im>`, `phi` or `unitary <m>` (seeded) |
//! | `symbol_file` | path to a symbol coefficient file |
//! | `divisor`, `divisor_file` | the divisor `Φ` for `factor`, same forms as `symbol` |
//! | `nvars` | number of variables for `blaschke` factors (default: length of `caps`) |
//! | `margin` | input margin per variable (default: symbol degree) |
//! | `headroom` | extra degrees in the enlarged grid |
//! | `subspace` | `vanishing-at-origin` or `mixed-powers` instead of a symbol |
//! | `basis_file`, `window` | subspace from a basis file and its window margin |
//! | `tuple` | `nilpotent <index>` (seeded pair from the 4×4 Jordan block) or `quotient` |
//! | `tuple_file` | path to a tuple file |
//! | `dim` | dimension of inline tuple blocks |
//! | `pairs`, `pair_radius` | kernel check pairs for `example42` |
//! | `kernel_caps`, `rank_caps`, `module_caps`, `budget`, `streams`, `search_radius`, `gram_threshold` | `example42` options |
//! | `max_power` | power used by the pureness test |
//!
//! Blocks: `symbol`, `divisor` (coefficient records), `numerator` /
//! `denominator` (rational `symbol`), `T1`, `T2`, … (inline tuple) and
//! `expect`, whose lines are `name = pass|fail` or `status = ok|error`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use polydisc_core::generators::seeded_unitary;
use polydisc_core::io::{self, Item, Line};
use polydisc_core::{AnalyticSymbol, CheckConfig, BidiscExampleOptions, C64};

use crate::error::ScenarioError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    CheckBeurling,
    CheckBrehmer,
    Dilate,
    Factor,
    BidiscExample,
    IdentitySuite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckBeurling => "check-beurling",
            Command::CheckBrehmer => "check-brehmer",
            Command::Dilate => "dilate",
            Command::Factor => "factor",
            Command::BidiscExample => "example42",
            Command::IdentitySuite => "identity-suite",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "check-beurling" => Command::CheckBeurling,
            "check-brehmer" => Command::CheckBrehmer,
            "dilate" => Command::Dilate,
            "factor" => Command::Factor,
            "example42" | "bidisc-example" => Command::BidiscExample,
            "identity-suite" => Command::IdentitySuite,
            _ => return None,
        })
    }
}

/// Where a symbol comes from; files are read when the scenario runs.
#[derive(Clone, Debug)]
pub enum SymbolSource {
    Inline(AnalyticSymbol),
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedSubspace {
    VanishingAtOrigin,
    MixedPowers,
}

#[derive(Clone, Debug)]
pub enum SubspaceSource {
    Symbol(SymbolSource),
    Named(NamedSubspace),
    BasisFile(PathBuf),
}

#[derive(Clone, Debug)]
pub enum TupleSource {
    Inline(Vec<polydisc_core::CMatrix>),
    File(PathBuf),
    Nilpotent(usize),
    /// Compressions of the quotient module of the scenario's symbol.
    Quotient,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expectation {
    /// `Some(true)` for `status = ok`, `Some(false)` for `status = error`.
    pub status_ok: Option<bool>,
    pub verdicts: BTreeMap<String, bool>,
}

impl Expectation {
    pub fn is_empty(&self) -> bool {
        self.status_ok.is_none() && self.verdicts.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub id: String,
    pub command: Command,
    pub caps: Option<Vec<usize>>,
    pub config: CheckConfig,
    pub seed: u64,
    pub subspace: Option<SubspaceSource>,
    pub divisor: Option<SymbolSource>,
    pub tuple: Option<TupleSource>,
    pub margin: Option<Vec<usize>>,
    pub window: usize,
    pub headroom: Option<usize>,
    pub max_power: usize,
    pub bidisc: BidiscExampleOptions,
    pub pairs: usize,
    pub pair_radius: f64,
    pub expect: Expectation,
}

/// Raw fields with the line they came from.
struct Fields {
    values: BTreeMap<String, (usize, String)>,
}

impl Fields {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.values.remove(key)
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>, ScenarioError> {
        self.take(key)
            .map(|(line, v)| io::parse_usize(line, key, &v).map_err(ScenarioError::from))
            .transpose()
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>, ScenarioError> {
        self.take(key)
            .map(|(line, v)| {
                v.parse::<u64>().map_err(|_| ScenarioError::Field {
                    line,
                    field: key.to_string(),
                    message: format!("`{v}` is not a non-negative integer"),
                })
            })
            .transpose()
    }

    fn positive(&mut self, key: &str) -> Result<Option<f64>, ScenarioError> {
        self.take(key)
            .map(|(line, v)| {
                let x = io::parse_f64(line, key, &v)?;
                if x > 0.0 {
                    Ok(x)
                } else {
                    Err(ScenarioError::Field {
                        line,
                        field: key.to_string(),
                        message: format!("must be positive, got {v}"),
                    })
                }
            })
            .transpose()
    }

    fn caps(&mut self, key: &str) -> Result<Option<Vec<usize>>, ScenarioError> {
        self.take(key)
            .map(|(line, v)| {
                let caps = io::parse_usize_list(line, key, &v)?;
                if caps.is_empty() || caps.contains(&0) {
                    return Err(ScenarioError::Field {
                        line,
                        field: key.to_string(),
                        message: "caps must all be at least 1".into(),
                    });
                }
                Ok(caps)
            })
            .transpose()
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<usize>>, ScenarioError> {
        self.take(key)
            .map(|(line, v)| io::parse_usize_list(line, key, &v).map_err(ScenarioError::from))
            .transpose()
    }
}

fn field_error(line: usize, field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Field {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

/// Parses one `*`-separated inline symbol description.
pub fn parse_symbol_expr(
    line: usize,
    field: &str,
    text: &str,
    nvars: usize,
    seed: u64,
) -> Result<AnalyticSymbol, ScenarioError> {
    let mut product: Option<AnalyticSymbol> = None;
    for (index, factor) in text.split('*').enumerate() {
        let tokens: Vec<&str> = factor.split_whitespace().collect();
        let bad = |m: &str| field_error(line, field, m.to_string());
        let symbol = match tokens.as_slice() {
            ["monomial", k] => {
                let k = io::parse_usize_list(line, field, k)?;
                AnalyticSymbol::monomial(&k).map_err(|e| bad(&e.to_string()))?
            }
            ["blaschke", var, re, im] => {
                let var = io::parse_usize(line, field, var)?;
                if var == 0 || var > nvars {
                    return Err(bad(&format!("blaschke variable {var} not in 1..={nvars}")));
                }
                let a = C64::new(io::parse_f64(line, field, re)?, io::parse_f64(line, field, im)?);
                AnalyticSymbol::blaschke(nvars, var - 1, a).map_err(|e| bad(&e.to_string()))?
            }
            ["phi"] => AnalyticSymbol::bidisc_phi().map_err(|e| bad(&e.to_string()))?,
            ["unitary", m] => {
                let m = io::parse_usize(line, field, m)?;
                if m == 0 {
                    return Err(bad("unitary size must be at least 1"));
                }
                AnalyticSymbol::constant(nvars, seeded_unitary(seed.wrapping_add(index as u64), m))
                    .map_err(|e| bad(&e.to_string()))?
            }
            _ => {
                return Err(bad(&format!(
                    "unknown symbol factor `{}` (expected monomial, blaschke, phi or unitary)",
                    factor.trim()
                )))
            }
        };
        product = Some(match product {
            None => symbol,
            Some(p) => p.mul(&symbol).map_err(|e| bad(&e.to_string()))?,
        });
    }
    product.ok_or_else(|| field_error(line, field, "empty symbol"))
}

fn block_items(label: &str, body: &[Line], line: usize) -> Vec<Item> {
    vec![Item::Block {
        line,
        label: label.to_string(),
        body: body.to_vec(),
    }]
}

fn parse_expect(body: &[Line]) -> Result<Expectation, ScenarioError> {
    let mut out = Expectation::default();
    for l in body {
        let Some((k, v)) = l.text.split_once('=') else {
            return Err(field_error(l.number, "expect", "expected `name = pass|fail`"));
        };
        let (k, v) = (k.trim(), v.trim());
        if k == "status" {
            out.status_ok = Some(match v {
                "ok" => true,
                "error" => false,
                _ => return Err(field_error(l.number, "expect", "status is `ok` or `error`")),
            });
            continue;
        }
        let verdict = match v {
            "pass" => true,
            "fail" => false,
            _ => return Err(field_error(l.number, "expect", format!("`{k}` must be pass or fail"))),
        };
        out.verdicts.insert(k.to_string(), verdict);
    }
    Ok(out)
}

fn resolve(base: Option<&Path>, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    }
}

/// Parses and validates a scenario; relative file paths resolve against `base`.
pub fn parse_scenario(text: &str, base: Option<&Path>) -> Result<Scenario, ScenarioError> {
    parse_scenario_named(text, base, None)
}

/// Reads a scenario file; the id defaults to the file stem.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let stem = path.file_stem().and_then(|s| s.to_str());
    parse_scenario_named(&text, path.parent(), stem)
}

pub fn parse_scenario_named(
    text: &str,
    base: Option<&Path>,
    default_id: Option<&str>,
) -> Result<Scenario, ScenarioError> {
    let items = io::parse_document(text)?;
    let mut values = BTreeMap::new();
    let mut blocks: BTreeMap<String, (usize, Vec<Line>)> = BTreeMap::new();
    for item in items {
        match item {
            Item::Field { line, key, value } => {
                if values.insert(key.clone(), (line, value)).is_some() {
                    return Err(field_error(line, &key, "field given twice"));
                }
            }
            Item::Block { line, label, body } => {
                if blocks.insert(label.clone(), (line, body)).is_some() {
                    return Err(field_error(line, &label, "block given twice"));
                }
            }
        }
    }
    let mut f = Fields { values };

    let Some((cmd_line, cmd)) = f.take("command") else {
        return Err(field_error(1, "command", "missing"));
    };
    let command = Command::parse(&cmd)
        .ok_or_else(|| field_error(cmd_line, "command", format!("unknown command `{cmd}`")))?;
    let id = f
        .take("id")
        .map(|(_, v)| v)
        .or_else(|| default_id.map(str::to_string))
        .unwrap_or_else(|| command.name().to_string());
    let caps = f.caps("caps")?;
    let seed = f.u64("seed")?.unwrap_or(0);

    let mut config = CheckConfig::default();
    if let Some(t) = f.positive("tol")? {
        config.tol = t;
    }
    if let Some(t) = f.positive("rank_tol")? {
        config.rank_tol = t;
    }
    if let Some(t) = f.positive("psd_tol")? {
        config.psd_tol = t;
    }
    if let Some(t) = f.positive("invariance_tol")? {
        config.invariance_tol = t;
    }
    if let Some((line, v)) = f.take("torus_samples") {
        let s = io::parse_usize(line, "torus_samples", &v)?;
        if s == 0 {
            return Err(field_error(line, "torus_samples", "must be at least 1"));
        }
        config.torus_samples = s;
    }

    let nvars_field = f.usize("nvars")?;
    let nvars = nvars_field
        .or_else(|| caps.as_ref().map(|c| c.len()))
        .unwrap_or(2);

    let symbol_source = |f: &mut Fields,
                         blocks: &mut BTreeMap<String, (usize, Vec<Line>)>,
                         key: &str|
     -> Result<Option<SymbolSource>, ScenarioError> {
        let file_key = format!("{key}_file");
        let inline = f.take(key);
        let file = f.take(&file_key);
        let block = blocks.remove(key);
        let (num, den) = if key == "symbol" {
            (blocks.remove("numerator"), blocks.remove("denominator"))
        } else {
            (None, None)
        };
        let given = [inline.is_some(), file.is_some(), block.is_some() || num.is_some() || den.is_some()];
        if given.iter().filter(|g| **g).count() > 1 {
            let line = inline.as_ref().or(file.as_ref()).map_or(0, |x| x.0);
            return Err(field_error(line, key, format!("give only one of `{key}`, `{file_key}` or a `{key}` block")));
        }
        if let Some((line, text)) = inline {
            return Ok(Some(SymbolSource::Inline(parse_symbol_expr(line, key, &text, nvars, seed)?)));
        }
        if let Some((_, path)) = file {
            return Ok(Some(SymbolSource::File(resolve(base, &path))));
        }
        if let Some((line, body)) = block {
            let items = block_items("coefficients", &body, line);
            return Ok(Some(SymbolSource::Inline(io::parse_symbol_items(&items, line)?)));
        }
        if num.is_some() || den.is_some() {
            let mut items = Vec::new();
            if let Some((line, body)) = num {
                items.extend(block_items("numerator", &body, line));
            }
            if let Some((line, body)) = den {
                items.extend(block_items("denominator", &body, line));
            }
            if let Some(n) = nvars_field {
                items.insert(0, Item::Field { line: 0, key: "nvars".into(), value: n.to_string() });
            }
            return Ok(Some(SymbolSource::Inline(io::parse_symbol_items(&items, 0)?)));
        }
        Ok(None)
    };

    let symbol = symbol_source(&mut f, &mut blocks, "symbol")?;
    let divisor = symbol_source(&mut f, &mut blocks, "divisor")?;

    let named = f
        .take("subspace")
        .map(|(line, v)| match v.as_str() {
            "vanishing-at-origin" => Ok(NamedSubspace::VanishingAtOrigin),
            "mixed-powers" => Ok(NamedSubspace::MixedPowers),
            _ => Err(field_error(line, "subspace", format!("unknown subspace `{v}`"))),
        })
        .transpose()?;
    let basis_file = f.take("basis_file");
    let subspace = match (symbol, named, basis_file) {
        (Some(s), None, None) => Some(SubspaceSource::Symbol(s)),
        (None, Some(n), None) => Some(SubspaceSource::Named(n)),
        (None, None, Some((_, p))) => Some(SubspaceSource::BasisFile(resolve(base, &p))),
        (None, None, None) => None,
        _ => {
            return Err(field_error(0, "subspace", "give only one of a symbol, `subspace` or `basis_file`"))
        }
    };

    let dim = f.usize("dim")?;
    let mut tuple_blocks = Vec::new();
    let labels: Vec<String> = blocks.keys().filter(|k| k.starts_with('T')).cloned().collect();
    for label in labels {
        let (line, body) = blocks.remove(&label).expect("label present");
        tuple_blocks.extend(block_items(&label, &body, line));
    }
    let tuple_field = f.take("tuple");
    let tuple_file = f.take("tuple_file");
    let tuple = match (tuple_field, tuple_file, tuple_blocks.is_empty()) {
        (Some((line, v)), None, true) => {
            let tokens: Vec<&str> = v.split_whitespace().collect();
            Some(match tokens.as_slice() {
                ["nilpotent", i] => TupleSource::Nilpotent(io::parse_usize(line, "tuple", i)?),
                ["quotient"] => TupleSource::Quotient,
                _ => return Err(field_error(line, "tuple", format!("unknown tuple source `{v}`"))),
            })
        }
        (None, Some((_, p)), true) => Some(TupleSource::File(resolve(base, &p))),
        (None, None, false) => {
            let Some(dim) = dim else {
                return Err(field_error(0, "dim", "inline tuple blocks need `dim`"));
            };
            let mut items = vec![Item::Field { line: 0, key: "dim".into(), value: dim.to_string() }];
            items.extend(tuple_blocks);
            Some(TupleSource::Inline(io::parse_tuple_items(&items)?))
        }
        (None, None, true) => None,
        _ => return Err(field_error(0, "tuple", "give only one of `tuple`, `tuple_file` or T blocks")),
    };

    let expect = match blocks.remove("expect") {
        Some((_, body)) => parse_expect(&body)?,
        None => Expectation::default(),
    };
    if let Some((label, (line, _))) = blocks.into_iter().next() {
        return Err(field_error(line, &label, format!("unknown block `{label}`")));
    }

    let margin = f.list("margin")?;
    let window = f.usize("window")?.unwrap_or(1);
    let headroom = f.usize("headroom")?;
    let max_power = f.usize("max_power")?.unwrap_or(64);

    let mut bidisc = BidiscExampleOptions {
        seed,
        ..BidiscExampleOptions::default()
    };
    if let Some(c) = f.caps("kernel_caps")? {
        bidisc.kernel_caps = c;
    }
    if let Some(c) = f.caps("rank_caps")? {
        bidisc.rank_caps = c;
    }
    if let Some(c) = f.caps("module_caps")? {
        bidisc.module_caps = c;
    }
    if let Some(b) = f.u64("budget")? {
        bidisc.search_budget = b;
    }
    if let Some(s) = f.u64("streams")? {
        bidisc.search_streams = s.max(1);
    }
    if let Some(r) = f.positive("search_radius")? {
        bidisc.search_radius = r;
    }
    if let Some(g) = f.positive("gram_threshold")? {
        bidisc.gram_threshold = g;
    }
    bidisc.torus_samples = config.torus_samples.max(bidisc.torus_samples);
    let pairs = f.usize("pairs")?.unwrap_or(20);
    let pair_radius = match f.take("pair_radius") {
        Some((line, v)) => {
            let r = io::parse_f64(line, "pair_radius", &v)?;
            if !(r > 0.0 && r < 1.0) {
                return Err(field_error(line, "pair_radius", "must lie in (0, 1)"));
            }
            r
        }
        None => 0.6,
    };

    if let Some((key, (line, _))) = f.values.into_iter().next() {
        return Err(field_error(line, &key, format!("unknown field `{key}`")));
    }

    let scenario = Scenario {
        id,
        command,
        caps,
        config,
        seed,
        subspace,
        divisor,
        tuple,
        margin,
        window,
        headroom,
        max_power,
        bidisc,
        pairs,
        pair_radius,
        expect,
    };
    validate(&scenario, cmd_line)?;
    Ok(scenario)
}

fn validate(s: &Scenario, line: usize) -> Result<(), ScenarioError> {
    let need = |ok: bool, field: &str, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(field_error(line, field, format!("{} needs {what}", s.command.name())))
        }
    };
    match s.command {
        Command::CheckBeurling | Command::IdentitySuite => {
            need(s.subspace.is_some(), "symbol", "a symbol source or a subspace")?;
            need(s.caps.is_some(), "caps", "grid caps")?;
        }
        Command::Factor => {
            need(
                matches!(s.subspace, Some(SubspaceSource::Symbol(_))),
                "symbol",
                "a symbol source",
            )?;
            need(s.divisor.is_some(), "divisor", "a divisor source")?;
            need(s.caps.is_some(), "caps", "grid caps")?;
        }
        Command::CheckBrehmer => {
            let quotient = matches!(s.tuple, Some(TupleSource::Quotient) | None);
            if quotient {
                need(s.subspace.is_some(), "tuple", "a tuple source or a symbol")?;
                need(s.caps.is_some(), "caps", "grid caps")?;
            }
        }
        Command::Dilate => {
            need(s.tuple.is_some(), "tuple", "a tuple source")?;
            need(s.caps.is_some(), "caps", "dilation grid caps")?;
            if matches!(s.tuple, Some(TupleSource::Quotient)) {
                return Err(field_error(line, "tuple", "dilate takes an explicit tuple"));
            }
        }
        Command::BidiscExample => {}
    }
    Ok(())
}

impl Scenario {
    /// Applies command-line overrides.
    pub fn override_with(&mut self, seed: Option<u64>, tol: Option<f64>, caps: Option<&[usize]>) {
        if let Some(s) = seed {
            self.seed = s;
            self.bidisc.seed = s;
        }
        if let Some(t) = tol {
            self.config.tol = t;
        }
        if let Some(c) = caps {
            self.caps = Some(c.to_vec());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_applied() {
        let s = parse_scenario("command = check-beurling\ncaps = 4,4\nsymbol = monomial 1,1\n", None).unwrap();
        assert_eq!(s.config.tol, 1e-8);
        assert_eq!(s.seed, 0);
        assert!(s.margin.is_none());
        assert_eq!(s.id, "check-beurling");
    }

    #[test]
    fn negative_tolerance_names_the_field() {
        let err = parse_scenario("command = check-beurling\ncaps = 4,4\nsymbol = monomial 1,1\ntol = -1\n", None)
            .unwrap_err();
        assert!(matches!(&err, ScenarioError::Field { field, line: 4, .. } if field == "tol"), "{err}");
    }

    #[test]
    fn unknown_command() {
        let err = parse_scenario("command = frobnicate\n", None).unwrap_err();
        assert!(err.to_string().contains("frobnicate"));
    }

    #[test]
    fn file_sources_are_deferred() {
        let s = parse_scenario(
            "command = check-beurling\ncaps = 3,3\nsymbol_file = theta.sym\n",
            Some(Path::new("/data")),
        )
        .unwrap();
        assert!(matches!(
            s.subspace,
            Some(SubspaceSource::Symbol(SymbolSource::File(ref p))) if p == Path::new("/data/theta.sym")
        ));
    }
}
