//! Run artifacts and the four command drivers behind the `beamfold` binary.
//!
//! A trace writes into one output directory:
//!
//! - `curve.csv`: one row per accepted point, preceded by `#` lines that
//!   repeat every numeric manifest field.
//! - `solutions.bin`: nodal values for bit-exact replay (see [`write_solutions`]).
//! - `manifest.json`: run description and verification summary.
//! - `plot.gp`: gnuplot script drawing λ against `p` with the fold marked.
//!
//! Exit codes:
//!
//! | code | meaning                                                        |
//! |------|----------------------------------------------------------------|
//! | 0    | success, every gating check passed                             |
//! | 1    | a gating check failed                                          |
//! | 2    | structural hypotheses violated, or `r = ∞` where a finite `r` is needed |
//! | 3    | trace failed before the fold, or the tail near `r` was not reached |
//! | 4    | unreadable, inconsistent or mismatched artifacts               |
//! | 64   | usage error                                                    |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::checks::{endpoint_convergence, endpoint_profile, third_difference_left_of_mid};
use crate::continuation::{
    assemble_curve, exploratory_report, locate_fold, trace_curve, BifurcationCurve, ContinuationConfig, CurvePoint,
    Mode, Termination,
};
use crate::error::{Error, Result};
use crate::mesh::{BeamSolution, DiscreteProblem};
use crate::nonlinearity::{catalog_lookup, check_hypotheses, HypothesisReport, Nonlinearity, Params, DEFAULT_SAMPLES};
use crate::spectral::{beam_principal_eigenvalue, lambda_upper_bound};

pub const SCHEMA_VERSION: u32 = 1;
pub const BIN_MAGIC: &[u8; 4] = b"BFLD";
pub const BIN_VERSION: u32 = 1;
pub const SEED_DIR_ENV: &str = "BEAMFOLD_SEED_DIR";
pub const CSV_HEADER: &str = "index,p,lambda,smallest_eig,symmetry_err,inflection_count,energy_dev,d2_0";
pub const ENERGY_TOL: f64 = 1e-2;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_TRACE: i32 = 3;
pub const EXIT_FILE: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

const CURVE_FILE: &str = "curve.csv";
const BIN_FILE: &str = "solutions.bin";
const MANIFEST_FILE: &str = "manifest.json";
const PLOT_FILE: &str = "plot.gp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Non-gating checks are reported but do not affect the exit code.
    pub gating: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            gating: true,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub model: String,
    pub params: Params,
    pub n: usize,
    pub mode: String,
    pub config: Value,
    pub started_at: String,
    pub finished_at: String,
    pub termination: String,
    pub lambda0: f64,
    pub p0: f64,
    pub fold_absent: bool,
    pub fold_index: Option<usize>,
    pub point_count: usize,
    pub hypothesis_passed: bool,
    /// SHA-256 of the JSON-serialized hypothesis report.
    pub hypothesis_digest: String,
    pub exploratory: bool,
    pub exploratory_report: Option<Value>,
    pub verification: Vec<CheckResult>,
    pub all_passed: bool,
}

impl RunManifest {
    /// `(key, value)` pairs of every numeric field, keys as dotted paths.
    pub fn numeric_fields(&self) -> Vec<(String, String)> {
        let mut v = serde_json::to_value(self).expect("manifest serializes");
        if let Value::Object(m) = &mut v {
            m.remove("started_at");
            m.remove("finished_at");
        }
        let mut out = Vec::new();
        flatten_numbers("", &v, &mut out);
        out
    }
}

fn flatten_numbers(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Number(x) => {
            let s = match (x.as_u64(), x.as_i64()) {
                (Some(u), _) => u.to_string(),
                (_, Some(i)) => i.to_string(),
                _ => format_f64(x.as_f64().unwrap_or(f64::NAN)),
            };
            out.push((prefix.to_string(), s));
        }
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten_numbers(&join(k), x, out)),
        Value::Array(a) => a
            .iter()
            .enumerate()
            .for_each(|(i, x)| flatten_numbers(&join(&i.to_string()), x, out)),
        _ => {}
    }
}

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn hypothesis_digest(report: &HypothesisReport) -> String {
    let json = serde_json::to_string(report).expect("report serializes");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn timestamp() -> String {
    let t = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    format!("{}.{:09}", t.as_secs(), t.subsec_nanos())
}

/// Resolves a relative output path against `BEAMFOLD_SEED_DIR` when set.
pub fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(SEED_DIR_ENV) {
        Some(root) if path.is_relative() && !root.is_empty() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------- CSV

/// One parsed `curve.csv` row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub index: usize,
    pub p: f64,
    pub lambda: f64,
    pub smallest_eig: f64,
    pub symmetry_err: f64,
    pub inflection_count: usize,
    pub energy_dev: f64,
    pub d2_0: f64,
}

impl CsvRow {
    pub fn from_point(index: usize, pt: &CurvePoint) -> Self {
        CsvRow {
            index,
            p: pt.p,
            lambda: pt.lambda,
            smallest_eig: pt.smallest_eig.unwrap_or(f64::NAN),
            symmetry_err: pt.diagnostics.symmetry_err,
            inflection_count: pt.diagnostics.inflection_count,
            energy_dev: pt.diagnostics.energy_dev,
            d2_0: pt.diagnostics.d2_0,
        }
    }

    /// Bitwise equality, NaN included.
    pub fn same_bits(&self, o: &CsvRow) -> bool {
        let eq = |a: f64, b: f64| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan());
        self.index == o.index
            && eq(self.p, o.p)
            && eq(self.lambda, o.lambda)
            && eq(self.smallest_eig, o.smallest_eig)
            && eq(self.symmetry_err, o.symmetry_err)
            && self.inflection_count == o.inflection_count
            && eq(self.energy_dev, o.energy_dev)
            && eq(self.d2_0, o.d2_0)
    }
}

pub fn render_csv(manifest: &RunManifest, curve: &BifurcationCurve) -> String {
    let mut s = String::new();
    s.push_str(&format!("# beamfold curve schema {SCHEMA_VERSION}\n"));
    s.push_str(&format!("# model = {}\n", manifest.model));
    for (k, v) in manifest.numeric_fields() {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s.push_str(CSV_HEADER);
    s.push('\n');
    for (i, pt) in curve.points.iter().enumerate() {
        let r = CsvRow::from_point(i, pt);
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.index,
            format_f64(r.p),
            format_f64(r.lambda),
            format_f64(r.smallest_eig),
            format_f64(r.symmetry_err),
            r.inflection_count,
            format_f64(r.energy_dev),
            format_f64(r.d2_0)
        ));
    }
    s
}

/// Parses data rows and the `# key = value` comment block.
pub fn parse_csv(text: &str) -> Result<(Vec<CsvRow>, Vec<(String, String)>)> {
    let bad = |line: usize, what: &str| Error::Format(format!("curve.csv line {}: {what}", line + 1));
    let mut comments = Vec::new();
    let mut rows = Vec::new();
    let mut header = false;
    for (ln, line) in text.lines().enumerate() {
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.split_once('=') {
                comments.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if !header {
            if line != CSV_HEADER {
                return Err(bad(ln, "unexpected header"));
            }
            header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(bad(ln, "expected 8 columns"));
        }
        let fl = |i: usize| cols[i].parse::<f64>().map_err(|_| bad(ln, "bad number"));
        let int = |i: usize| cols[i].parse::<usize>().map_err(|_| bad(ln, "bad integer"));
        rows.push(CsvRow {
            index: int(0)?,
            p: fl(1)?,
            lambda: fl(2)?,
            smallest_eig: fl(3)?,
            symmetry_err: fl(4)?,
            inflection_count: int(5)?,
            energy_dev: fl(6)?,
            d2_0: fl(7)?,
        });
    }
    if !header {
        return Err(Error::Format("curve.csv has no header".into()));
    }
    Ok((rows, comments))
}

// ---------------------------------------------------------------- binary

/// `BFLD`, then `u32` version, `n`, point count, then per point `λ, p` and
/// the `n − 2` interior values; all little-endian, floats as `f64`.
pub fn write_solutions(curve: &BifurcationCurve) -> Vec<u8> {
    let m = curve.n - 2;
    let mut b = Vec::with_capacity(16 + curve.points.len() * (m + 2) * 8);
    b.extend_from_slice(BIN_MAGIC);
    b.extend_from_slice(&BIN_VERSION.to_le_bytes());
    b.extend_from_slice(&(curve.n as u32).to_le_bytes());
    b.extend_from_slice(&(curve.points.len() as u32).to_le_bytes());
    for pt in &curve.points {
        b.extend_from_slice(&pt.lambda.to_le_bytes());
        b.extend_from_slice(&pt.p.to_le_bytes());
        for v in &pt.solution.u {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    b
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredPoint {
    pub lambda: f64,
    pub p: f64,
    pub u: Vec<f64>,
}

/// Returns `(n, points)`.
pub fn read_solutions(bytes: &[u8]) -> Result<(usize, Vec<StoredPoint>)> {
    if bytes.len() < 16 || &bytes[..4] != BIN_MAGIC {
        return Err(Error::Format("solutions.bin: bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (version, n, count) = (word(4), word(8), word(12));
    if version != BIN_VERSION as usize {
        return Err(Error::Format(format!("solutions.bin: unsupported version {version}")));
    }
    if n < 3 {
        return Err(Error::Format(format!("solutions.bin: bad grid size {n}")));
    }
    let per = n; // λ, p and n − 2 values
    let expected = count
        .checked_mul(per * 8)
        .and_then(|x| x.checked_add(16))
        .ok_or_else(|| Error::Format("solutions.bin: size overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "solutions.bin: {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let vals: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let pts = vals
        .chunks_exact(per)
        .map(|c| StoredPoint {
            lambda: c[0],
            p: c[1],
            u: c[2..].to_vec(),
        })
        .collect();
    Ok((n, pts))
}

pub fn render_plot(curve: &BifurcationCurve) -> String {
    let mut s = format!(
        "# lambda against p = max u for {}\n\
         set datafile separator ','\n\
         set datafile commentschars '#'\n\
         set key autotitle columnhead\n\
         set xlabel 'lambda'\n\
         set ylabel 'p = max u'\n\
         set grid\n\
         set terminal pngcairo size 900,600\n\
         set output 'curve.png'\n",
        curve.model
    );
    if curve.fold_absent {
        s.push_str("plot 'curve.csv' using 3:2 with linespoints pt 7 ps 0.4 title 'solution curve'\n");
    } else {
        s.push_str(&format!(
            "set arrow from {l},graph 0 to {l},graph 1 nohead dashtype 2\n\
             plot 'curve.csv' using 3:2 with linespoints pt 7 ps 0.4 title 'solution curve', \\\n\
             \x20    '-' using 1:2 with points pt 6 ps 2 title 'fold'\n\
             {l} {p}\n\
             e\n",
            l = format_f64(curve.lambda0),
            p = format_f64(curve.p0)
        ));
    }
    s
}

// ---------------------------------------------------------------- checks

fn sign_flips(v: &[f64]) -> Vec<usize> {
    v.windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] > 0.0) != (w[1] > 0.0))
        .map(|(i, _)| i + 1)
        .collect()
}

/// Curve-level verifications.
pub fn verify_curve(dp: &DiscreteProblem, curve: &BifurcationCurve, hyp: &HypothesisReport) -> Vec<CheckResult> {
    let pts = &curve.points;
    let linear = dp.nl().is_linear_reference();
    let mut out = Vec::new();

    let increasing = pts.windows(2).all(|w| w[1].p > w[0].p);
    out.push(CheckResult::new("p_increasing", increasing, format!("{} points", pts.len())));

    let term_ok = matches!(
        curve.termination,
        Termination::ReachedPMax | Termination::LambdaMin | Termination::LambdaMax
    );
    out.push(CheckResult::new(
        "termination",
        term_ok,
        curve.termination.as_str().to_string(),
    ));

    let bad_shape: Vec<usize> = (0..pts.len()).filter(|&i| !pts[i].diagnostics.shape_ok).collect();
    out.push(CheckResult::new(
        "solution_shape",
        bad_shape.is_empty(),
        format!("{} of {} points fail (first: {:?})", bad_shape.len(), pts.len(), bad_shape.first()),
    ));

    let max_e = pts.iter().map(|p| p.diagnostics.energy_dev).fold(0.0, f64::max);
    out.push(CheckResult::new(
        "energy",
        max_e <= ENERGY_TOL,
        format!("max deviation {max_e:.3e} (tol {ENERGY_TOL:e})"),
    ));

    let (maxima, minima) = curve.turning_points();
    let fold_ok = if linear {
        curve.fold_absent && maxima == 0 && minima == 0
    } else {
        !curve.fold_absent && maxima == 1 && minima == 0
    };
    out.push(CheckResult::new(
        "single_fold",
        fold_ok,
        format!(
            "maxima {maxima}, minima {minima}, fold {}",
            if curve.fold_absent { "absent".into() } else { format!("at p = {:.6}", curve.p0) }
        ),
    ));

    let start = curve.fold_index.map_or(pts.len(), |i| i + 1);
    let upper_ok = pts[start.min(pts.len())..].windows(2).all(|w| w[1].lambda < w[0].lambda);
    out.push(CheckResult::new(
        "upper_branch_decreasing",
        upper_ok,
        format!("{} upper-branch points", pts.len().saturating_sub(start)),
    ));

    let eigs: Vec<f64> = pts.iter().map(|p| p.smallest_eig.unwrap_or(f64::NAN)).collect();
    let eig_ok;
    let eig_detail;
    if eigs.iter().any(|e| e.is_nan()) {
        eig_ok = false;
        eig_detail = "eigenvalues missing".to_string();
    } else {
        let flips = sign_flips(&eigs);
        eig_ok = match (linear, curve.fold_index) {
            (true, _) => flips.is_empty() && eigs[0] > 0.0,
            (false, Some(k)) => flips.len() == 1 && eigs[0] > 0.0 && flips[0].abs_diff(k) <= 2,
            (false, None) => false,
        };
        eig_detail = format!("sign changes at {flips:?}, fold index {:?}", curve.fold_index);
    }
    out.push(CheckResult::new("eigenvalue_sign_change", eig_ok, eig_detail));

    let bound = match (dp.nl().has_finite_radius(), hyp.a_estimate) {
        (true, Some(a)) => lambda_upper_bound(dp.nl(), a).ok(),
        _ => None,
    };
    out.push(match bound {
        Some(b) => CheckResult::new(
            "lambda_bound",
            curve.lambda0 <= b,
            format!("lambda0 {:.6} <= bound {b:.6}", curve.lambda0),
        ),
        None => CheckResult {
            gating: false,
            ..CheckResult::new("lambda_bound", true, "not applicable (no finite r with positive a)".into())
        },
    });

    // Outside the hypotheses the curve may turn back in p and lose its
    // shape; the multistart oracle is the only gate there.
    if curve.exploratory {
        out.iter_mut().for_each(|c| c.gating = false);
    }
    out
}

pub fn all_gating_pass(checks: &[CheckResult]) -> bool {
    checks.iter().all(|c| c.passed || !c.gating)
}

// ---------------------------------------------------------------- commands

#[derive(Debug, Clone, PartialEq)]
pub struct TraceArgs {
    pub model: String,
    pub params: Params,
    pub n: usize,
    pub mode: Mode,
    pub out: PathBuf,
    pub exploratory: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyArgs {
    /// Output directory of a trace, or its `curve.csv`.
    pub curve: PathBuf,
    pub model: String,
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointArgs {
    pub model: String,
    pub params: Params,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundArgs {
    pub model: String,
    pub params: Params,
    pub curve: Option<PathBuf>,
}

/// Early exit with a code and a message for the user.
struct Stop(i32, String);

impl Stop {
    fn usage(e: Error) -> Self {
        Stop(EXIT_USAGE, e.to_string())
    }
    fn file(e: impl std::fmt::Display) -> Self {
        Stop(EXIT_FILE, e.to_string())
    }
}

fn finish(out: &mut dyn Write, r: std::result::Result<i32, Stop>) -> i32 {
    match r {
        Ok(code) => code,
        Err(Stop(code, msg)) => {
            let _ = writeln!(out, "error: {msg}");
            code
        }
    }
}

fn trace_dir(p: &Path) -> PathBuf {
    let p = resolve_out(p);
    if p.file_name().is_some_and(|f| f == CURVE_FILE) {
        p.parent().map(Path::to_path_buf).unwrap_or_default()
    } else {
        p
    }
}

fn lookup(model: &str, params: &Params) -> std::result::Result<Nonlinearity, Stop> {
    catalog_lookup(model, params).map_err(Stop::usage)
}

pub fn cmd_trace(args: &TraceArgs, out: &mut dyn Write) -> i32 {
    let r = run_trace(args, out);
    finish(out, r)
}

fn run_trace(args: &TraceArgs, out: &mut dyn Write) -> std::result::Result<i32, Stop> {
    let started_at = timestamp();
    let nl = lookup(&args.model, &args.params)?;
    let linear = nl.is_linear_reference();
    let hyp = check_hypotheses(&nl, DEFAULT_SAMPLES).map_err(Stop::usage)?;
    let dp = DiscreteProblem::new(nl, args.n).map_err(Stop::usage)?;
    let mut cfg = ContinuationConfig::for_problem(&dp);
    cfg.mode = args.mode;
    cfg.exploratory = args.exploratory;

    let curve = match trace_curve(&dp, &cfg) {
        Ok(c) => c,
        Err(Error::Hypothesis(why)) => {
            return Err(Stop(EXIT_HYPOTHESIS, format!("hypothesis violated for {}: {why}", args.model)))
        }
        Err(e @ Error::Config(_)) => return Err(Stop::usage(e)),
        Err(e) => return Err(Stop(EXIT_TRACE, e.to_string())),
    };
    if curve.termination == Termination::StepFailure && curve.fold_absent && !linear && !curve.exploratory {
        let p = curve.points.last().map_or(0.0, |pt| pt.p);
        return Err(Stop(EXIT_TRACE, format!("trace failed before the fold (last p = {p})")));
    }

    let mut checks = verify_curve(&dp, &curve, &hyp);
    let explore = if curve.exploratory {
        let rep = exploratory_report(&dp, &curve);
        checks.push(CheckResult::new(
            "exploratory_oracle",
            rep.is_some(),
            if rep.is_some() { "multistart oracle agrees".into() } else { "multistart oracle disagrees".into() },
        ));
        rep.map(|r| serde_json::to_value(r).expect("report serializes"))
    } else {
        None
    };
    let all_passed = all_gating_pass(&checks);

    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        model: args.model.clone(),
        params: args.params.clone(),
        n: args.n,
        mode: args.mode.as_str().to_string(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        started_at,
        finished_at: timestamp(),
        termination: curve.termination.as_str().to_string(),
        lambda0: curve.lambda0,
        p0: curve.p0,
        fold_absent: curve.fold_absent,
        fold_index: curve.fold_index,
        point_count: curve.points.len(),
        hypothesis_passed: hyp.passes(),
        hypothesis_digest: hypothesis_digest(&hyp),
        exploratory: curve.exploratory,
        exploratory_report: explore,
        verification: checks.clone(),
        all_passed,
    };

    let dir = resolve_out(&args.out);
    fs::create_dir_all(&dir).map_err(Stop::file)?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&dir.join(CURVE_FILE), render_csv(&manifest, &curve).as_bytes()).map_err(Stop::file)?;
    write_atomic(&dir.join(BIN_FILE), &write_solutions(&curve)).map_err(Stop::file)?;
    write_atomic(&dir.join(PLOT_FILE), render_plot(&curve).as_bytes()).map_err(Stop::file)?;
    write_atomic(&dir.join(MANIFEST_FILE), json.as_bytes()).map_err(Stop::file)?;

    let _ = writeln!(
        out,
        "{}: {} points, termination {}, {}",
        args.model,
        curve.points.len(),
        curve.termination.as_str(),
        if curve.fold_absent {
            format!("fold absent (max lambda {:.10})", curve.lambda0)
        } else {
            format!("fold lambda0 = {:.10} at p0 = {:.10}", curve.lambda0, curve.p0)
        }
    );
    print_checks(out, &checks);
    let _ = writeln!(out, "wrote {}", dir.display());
    Ok(if all_passed { EXIT_OK } else { EXIT_VERIFY })
}

fn print_checks(out: &mut dyn Write, checks: &[CheckResult]) {
    for c in checks {
        let tag = match (c.passed, c.gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        let _ = writeln!(out, "[{tag}] {}: {}", c.name, c.detail);
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest.json: {e}")))?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!("manifest schema {} (expected {SCHEMA_VERSION})", m.schema_version)));
    }
    Ok(m)
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> i32 {
    let r = run_verify(args, out);
    finish(out, r)
}

fn run_verify(args: &VerifyArgs, out: &mut dyn Write) -> std::result::Result<i32, Stop> {
    let dir = trace_dir(&args.curve);
    let manifest = read_manifest(&dir).map_err(Stop::file)?;
    let nl = lookup(&args.model, &args.params)?;
    if manifest.model != args.model || manifest.params != args.params {
        return Err(Stop(
            EXIT_FILE,
            format!("artifacts were produced by `{}` {:?}", manifest.model, manifest.params),
        ));
    }
    let hyp = check_hypotheses(&nl, DEFAULT_SAMPLES).map_err(Stop::usage)?;
    if hypothesis_digest(&hyp) != manifest.hypothesis_digest {
        return Err(Stop(EXIT_FILE, "hypothesis digest does not match the manifest".into()));
    }
    let mode = Mode::parse(&manifest.mode).ok_or_else(|| Stop::file(format!("unknown mode {}", manifest.mode)))?;
    let termination = Termination::parse(&manifest.termination)
        .ok_or_else(|| Stop::file(format!("unknown termination {}", manifest.termination)))?;

    let csv = fs::read_to_string(dir.join(CURVE_FILE)).map_err(Stop::file)?;
    let (rows, _) = parse_csv(&csv).map_err(Stop::file)?;
    let bytes = fs::read(dir.join(BIN_FILE)).map_err(Stop::file)?;
    let (n, stored) = read_solutions(&bytes).map_err(Stop::file)?;
    if n != manifest.n || stored.len() != manifest.point_count || rows.len() != manifest.point_count {
        return Err(Stop(
            EXIT_FILE,
            format!(
                "point counts disagree: manifest {} (n = {}), csv {}, bin {} (n = {n})",
                manifest.point_count,
                manifest.n,
                rows.len(),
                stored.len()
            ),
        ));
    }
    for (i, (row, sp)) in rows.iter().zip(&stored).enumerate() {
        if row.index != i || row.p.to_bits() != sp.p.to_bits() || row.lambda.to_bits() != sp.lambda.to_bits() {
            return Err(Stop(EXIT_FILE, format!("curve.csv and solutions.bin disagree at row {i}")));
        }
    }

    let dp = DiscreteProblem::new(nl, n).map_err(Stop::file)?;
    let mut points = Vec::with_capacity(stored.len());
    for sp in stored {
        let sol = BeamSolution::new(&dp, sp.lambda, sp.u).map_err(Stop::file)?;
        if sol.p.to_bits() != sp.p.to_bits() {
            return Err(Stop(EXIT_FILE, "stored p differs from the stored profile maximum".into()));
        }
        points.push(CurvePoint::from_solution(&dp, sol, true).map_err(Stop::file)?);
    }
    let curve = assemble_curve(&dp, mode, points, termination, manifest.exploratory, 0);

    let mut checks = Vec::new();
    let replay: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(i, row)| !row.same_bits(&CsvRow::from_point(*i, &curve.points[*i])))
        .map(|(i, _)| i)
        .collect();
    checks.push(CheckResult::new(
        "diagnostics_replay",
        replay.is_empty(),
        format!("{} rows differ from recomputation", replay.len()),
    ));
    let fit = locate_fold(&curve.pl());
    let fold_ok = fit.absent == manifest.fold_absent && (fit.lambda0 - manifest.lambda0).abs() <= 1e-12;
    checks.push(CheckResult::new(
        "fold_consistent",
        fold_ok,
        format!("refit lambda0 {:.16e}, manifest {:.16e}", fit.lambda0, manifest.lambda0),
    ));
    checks.extend(verify_curve(&dp, &curve, &hyp));
    print_checks(out, &checks);
    Ok(if all_gating_pass(&checks) { EXIT_OK } else { EXIT_VERIFY })
}

pub fn cmd_endpoint(args: &EndpointArgs, out: &mut dyn Write) -> i32 {
    let r = run_endpoint(args, out);
    finish(out, r)
}

fn run_endpoint(args: &EndpointArgs, out: &mut dyn Write) -> std::result::Result<i32, Stop> {
    let nl = lookup(&args.model, &args.params)?;
    if !nl.has_finite_radius() {
        return Err(Stop(EXIT_TRACE, format!("{} has no finite endpoint (r = inf)", args.model)));
    }
    let r = nl.radius();
    let dp = DiscreteProblem::new(nl, args.n).map_err(Stop::usage)?;
    let cfg = ContinuationConfig::for_problem(&dp);
    let curve = match trace_curve(&dp, &cfg) {
        Ok(c) => c,
        Err(Error::Hypothesis(why)) => return Err(Stop(EXIT_HYPOTHESIS, format!("hypothesis violated: {why}"))),
        Err(e) => return Err(Stop(EXIT_TRACE, e.to_string())),
    };
    let table = match endpoint_convergence(&dp, &curve, r) {
        Ok(t) => t,
        Err(e @ Error::TailNotReached { .. }) => return Err(Stop(EXIT_TRACE, e.to_string())),
        Err(e) => return Err(Stop(EXIT_TRACE, e.to_string())),
    };
    let prof = endpoint_profile(r, &dp).map_err(|e| Stop(EXIT_TRACE, e.to_string()))?;

    let _ = writeln!(out, "{}: r = {r}, n = {}, {} tail rows", args.model, args.n, table.rows.len());
    let _ = writeln!(out, "{:>6} {:>14} {:>14} {:>12} {:>12} {:>12} {:>14}", "index", "p", "lambda", "e0", "e1", "e2", "u'''(1/2-)");
    for row in &table.rows {
        let _ = writeln!(
            out,
            "{:>6} {:>14.10} {:>14.6e} {:>12.4e} {:>12.4e} {:>12.4e} {:>14.6}",
            row.index, row.p, row.lambda, row.e0, row.e1, row.e2, row.d3_mid_left
        );
    }
    let last = curve.points.last().expect("tail exists");
    let u = dp.full(&last.solution.u);
    let _ = writeln!(out, "w(x) = 12 r x^2 - 16 r x^3 on [0, 1/2], mirrored");
    let _ = writeln!(out, "{:>8} {:>14} {:>14}", "x", "w", "u(last)");
    let quarter = (dp.n() - 1) / 4;
    for k in [quarter / 2, quarter, dp.mid()] {
        let _ = writeln!(out, "{:>8.4} {:>14.10} {:>14.10}", dp.x(k), prof.w[k], u[k]);
    }
    let _ = writeln!(
        out,
        "w''(0) = {:.6} (grid {:.6}), w'''(1/2-) = {:.6} (grid {:.6}), last u'''(1/2-) = {:.6}",
        prof.d2_0,
        prof.d2_0_numeric,
        prof.d3_left,
        prof.d3_left_numeric,
        third_difference_left_of_mid(&dp, &u)
    );
    let flags = [
        ("e0_monotone", table.e0_monotone),
        ("e1_monotone", table.e1_monotone),
        ("e2_monotone", table.e2_monotone),
    ];
    for (name, ok) in flags {
        let _ = writeln!(out, "[{}] {name}", if ok { "PASS" } else { "FAIL" });
    }
    let _ = writeln!(out, "final e0 = {:.6e}", table.last().e0);
    Ok(if flags.iter().all(|f| f.1) { EXIT_OK } else { EXIT_VERIFY })
}

pub fn cmd_bound(args: &BoundArgs, out: &mut dyn Write) -> i32 {
    let r = run_bound(args, out);
    finish(out, r)
}

fn run_bound(args: &BoundArgs, out: &mut dyn Write) -> std::result::Result<i32, Stop> {
    let nl = lookup(&args.model, &args.params)?;
    if !nl.has_finite_radius() {
        return Err(Stop(EXIT_HYPOTHESIS, format!("{} has r = inf; no bound", args.model)));
    }
    let hyp = check_hypotheses(&nl, DEFAULT_SAMPLES).map_err(Stop::usage)?;
    let a = match hyp.a_estimate {
        Some(a) if a > 0.0 => a,
        _ => return Err(Stop(EXIT_HYPOTHESIS, "no positive a with f(u) >= a/(r-u)".into())),
    };
    let (_, mu1) = beam_principal_eigenvalue(1e-12);
    let bound = lambda_upper_bound(&nl, a).map_err(|e| Stop(EXIT_HYPOTHESIS, e.to_string()))?;
    let _ = writeln!(out, "model      {}", args.model);
    let _ = writeln!(out, "r          {}", nl.radius());
    let _ = writeln!(out, "a_estimate {a:.10}{}", if hyp.a_is_exact { " (exact)" } else { "" });
    let _ = writeln!(out, "mu1        {mu1:.10}");
    let _ = writeln!(out, "bound      {bound:.10}");
    let Some(path) = &args.curve else {
        return Ok(EXIT_OK);
    };
    let manifest = read_manifest(&trace_dir(path)).map_err(Stop::file)?;
    if manifest.model != args.model || manifest.params != args.params {
        return Err(Stop(EXIT_FILE, format!("curve was traced for `{}`", manifest.model)));
    }
    let margin = bound - manifest.lambda0;
    let _ = writeln!(out, "lambda0    {:.10}", manifest.lambda0);
    let _ = writeln!(out, "margin     {margin:.10}");
    Ok(if margin >= 0.0 { EXIT_OK } else { EXIT_VERIFY })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_curve(name: &str, n: usize) -> (DiscreteProblem, BifurcationCurve) {
        let dp = DiscreteProblem::new(catalog_lookup(name, &Params::new()).unwrap(), n).unwrap();
        let mut cfg = ContinuationConfig::for_problem(&dp);
        if !dp.nl().has_finite_radius() {
            cfg.p_cap = 1.0;
        }
        let c = trace_curve(&dp, &cfg).unwrap();
        (dp, c)
    }

    #[test]
    fn binary_round_trip() {
        let (_, c) = small_curve("constant_load", 31);
        let b = write_solutions(&c);
        assert_eq!(&b[..4], b"BFLD");
        let (n, pts) = read_solutions(&b).unwrap();
        assert_eq!(n, 31);
        assert_eq!(pts.len(), c.points.len());
        for (a, s) in c.points.iter().zip(&pts) {
            assert_eq!(a.lambda.to_bits(), s.lambda.to_bits());
            assert_eq!(a.solution.u, s.u);
        }
        assert!(read_solutions(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(read_solutions(&bad).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let (dp, c) = small_curve("inverse_square", 51);
        let hyp = check_hypotheses(dp.nl(), 1000).unwrap();
        let m = RunManifest {
            schema_version: SCHEMA_VERSION,
            tool_version: "t".into(),
            model: c.model.clone(),
            params: Params::new(),
            n: c.n,
            mode: "max".into(),
            config: Value::Null,
            started_at: "0".into(),
            finished_at: "1".into(),
            termination: c.termination.as_str().into(),
            lambda0: c.lambda0,
            p0: c.p0,
            fold_absent: c.fold_absent,
            fold_index: c.fold_index,
            point_count: c.points.len(),
            hypothesis_passed: true,
            hypothesis_digest: hypothesis_digest(&hyp),
            exploratory: false,
            exploratory_report: None,
            verification: vec![],
            all_passed: true,
        };
        let text = render_csv(&m, &c);
        let (rows, comments) = parse_csv(&text).unwrap();
        assert_eq!(rows.len(), c.points.len());
        for (i, row) in rows.iter().enumerate() {
            assert!(row.same_bits(&CsvRow::from_point(i, &c.points[i])));
        }
        let keys: Vec<&str> = comments.iter().map(|(k, _)| k.as_str()).collect();
        for (k, _) in m.numeric_fields() {
            assert!(keys.contains(&k.as_str()), "{k} missing from csv");
        }
        let l0 = comments.iter().find(|(k, _)| k == "lambda0").unwrap().1.parse::<f64>().unwrap();
        assert_eq!(l0.to_bits(), c.lambda0.to_bits());
    }

    #[test]
    fn digest_is_stable_hex() {
        let nl = catalog_lookup("inverse_square", &Params::new()).unwrap();
        let a = hypothesis_digest(&check_hypotheses(&nl, 500).unwrap());
        let b = hypothesis_digest(&check_hypotheses(&nl, 500).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        assert!(a.chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn plot_marks_fold() {
        let (_, c) = small_curve("inverse_square", 51);
        assert!(render_plot(&c).contains("title 'fold'"));
        let (_, lin) = small_curve("constant_load", 31);
        assert!(!render_plot(&lin).contains("title 'fold'"));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn sign_flip_positions() {
        assert_eq!(sign_flips(&[3.0, 1.0, -1.0, -2.0]), vec![2]);
        assert!(sign_flips(&[1.0, 2.0]).is_empty());
    }

    #[test]
    fn bound_rejects_infinite_radius() {
        let mut sink = Vec::new();
        let code = cmd_bound(
            &BoundArgs {
                model: "exponential".into(),
                params: Params::new(),
                curve: None,
            },
            &mut sink,
        );
        assert_eq!(code, EXIT_HYPOTHESIS);
    }
}
