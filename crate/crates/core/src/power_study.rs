//! Monte-Carlo power study: rejection rates of the tests over a grid of
//! alternatives, censoring rates and statistics.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bootstrap::{bootstrap_tests_each, BootstrapConfig};
use crate::distributions::{generate_censored_sample, DistSpec};
use crate::error::{input, Error, Result};
use crate::rng::{derive_seed, label_id, stream};
use crate::statistics::{chi2_asymptotic_test, check_alpha, Hypothesis, StatKind, StatisticSpec};

const VALID_KEYS: [&str; 11] =
    ["n", "N", "B", "alpha", "rates", "alternatives", "statistics", "hypothesis", "mu", "seed", "threads"];

/// A cell is flagged when more than this fraction of its replicates failed.
const DEGRADED_FRACTION: f64 = 0.02;

/// Study grid and Monte-Carlo settings.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Sample size.
    pub n: usize,
    /// Outer Monte-Carlo replicates per cell.
    pub replicates: usize,
    /// Bootstrap iterations per replicate.
    pub bootstrap: usize,
    pub alpha: f64,
    pub rates: Vec<f64>,
    pub alternatives: Vec<DistSpec>,
    pub statistics: Vec<StatisticSpec>,
    pub hypothesis: Hypothesis,
    pub seed: u64,
    /// Worker threads; 0 means one per available core. Does not affect results.
    pub threads: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            n: 50,
            replicates: 500,
            bootstrap: 500,
            alpha: 0.05,
            rates: vec![0.1, 0.2, 0.3],
            alternatives: Vec::new(),
            statistics: Vec::new(),
            hypothesis: Hypothesis::Simple { mu: 1.0 },
            seed: 1,
            threads: 0,
        }
    }
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema { msg: msg.into(), valid: VALID_KEYS.join(", ") }
}

fn list<T: FromStr<Err = Error>>(value: &str) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
}

impl StudyConfig {
    /// Parses a `key = value` file. Lines starting with `#` are comments and
    /// list values are comma separated:
    ///
    /// ```text
    /// n = 50
    /// N = 500
    /// B = 500
    /// rates = 0.1, 0.3
    /// alternatives = exp:1, weibull:1.4, lognormal:0.8
    /// statistics = J:PR:a=1, M:D:a=1, cvm, chi2:r=3
    /// hypothesis = simple
    /// seed = 2024
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = StudyConfig::default();
        let mut mu = None;
        let mut hypothesis = None;
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse { line: line_no, msg: format!("expected `key = value`, got `{line}`") });
            };
            let (key, value) = (key.trim(), value.trim());
            if !VALID_KEYS.contains(&key) {
                return Err(schema(format!("unknown key `{key}` on line {line_no}")));
            }
            if let Some(prev) = seen.insert(key.to_string(), line_no) {
                return Err(schema(format!("key `{key}` repeated on lines {prev} and {line_no}")));
            }
            let at = |e: Error| Error::Parse { line: line_no, msg: format!("{key}: {e}") };
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>().map_err(|_| Error::Parse { line: line_no, msg: format!("{key}: `{v}` is not a number") })
            };
            let int = |v: &str| -> Result<u64> {
                v.parse::<u64>().map_err(|_| Error::Parse { line: line_no, msg: format!("{key}: `{v}` is not an integer") })
            };
            match key {
                "n" => cfg.n = int(value)? as usize,
                "N" => cfg.replicates = int(value)? as usize,
                "B" => cfg.bootstrap = int(value)? as usize,
                "alpha" => cfg.alpha = num(value)?,
                "rates" => {
                    cfg.rates = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(num).collect::<Result<_>>()?
                }
                "alternatives" => cfg.alternatives = list(value).map_err(at)?,
                "statistics" => cfg.statistics = list(value).map_err(at)?,
                "hypothesis" => hypothesis = Some(value.to_ascii_lowercase()),
                "mu" => mu = Some(num(value)?),
                "seed" => cfg.seed = int(value)?,
                "threads" => cfg.threads = int(value)? as usize,
                _ => unreachable!(),
            }
        }
        for required in ["alternatives", "statistics"] {
            if !seen.contains_key(required) {
                return Err(schema(format!("missing required key `{required}`")));
            }
        }
        cfg.hypothesis = match hypothesis.as_deref() {
            None | Some("simple") => Hypothesis::Simple { mu: mu.unwrap_or(1.0) },
            Some("composite") => {
                if mu.is_some() {
                    return Err(schema("`mu` only applies to the simple hypothesis"));
                }
                Hypothesis::Composite
            }
            Some(other) => return Err(schema(format!("hypothesis must be `simple` or `composite`, got `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return input(format!("sample size must be at least 2, got {}", self.n));
        }
        if self.replicates == 0 {
            return input("N must be positive");
        }
        if self.bootstrap < 100 {
            return input(format!("B must be at least 100, got {}", self.bootstrap));
        }
        check_alpha(self.alpha)?;
        if self.rates.is_empty() {
            return input("at least one censoring rate is required");
        }
        if let Some(r) = self.rates.iter().find(|r| !(0.0..0.5).contains(*r)) {
            return input(format!("censoring rates must lie in [0, 0.5), got {r}"));
        }
        if self.alternatives.is_empty() {
            return input("at least one alternative is required");
        }
        if self.statistics.is_empty() {
            return input("at least one statistic is required");
        }
        for s in &self.statistics {
            s.validate()?;
        }
        if let Hypothesis::Simple { mu } = self.hypothesis {
            if !(mu > 0.0 && mu.is_finite()) {
                return input(format!("mu must be positive, got {mu}"));
            }
        }
        Ok(())
    }

    /// Canonical text form. The thread budget is left out since it does not
    /// influence results.
    pub fn canonical(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let mut out = format!(
            "n = {}\nN = {}\nB = {}\nalpha = {}\nrates = {}\nalternatives = {}\nstatistics = {}\nhypothesis = {}\n",
            self.n,
            self.replicates,
            self.bootstrap,
            self.alpha,
            join(self.rates.iter().map(|r| r.to_string()).collect()),
            join(self.alternatives.iter().map(|a| a.to_string()).collect()),
            join(self.statistics.iter().map(|s| s.to_string()).collect()),
            self.hypothesis.name(),
        );
        if let Hypothesis::Simple { mu } = self.hypothesis {
            out.push_str(&format!("mu = {mu}\n"));
        }
        out.push_str(&format!("seed = {}\n", self.seed));
        out
    }

    /// First 16 hex digits of the SHA-256 of [`StudyConfig::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Settings a table was produced with.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
    pub n: usize,
    pub replicates: usize,
    pub bootstrap: usize,
    pub alpha: f64,
    pub hypothesis: Hypothesis,
    pub seed: u64,
}

/// Rejection rate of one statistic against one alternative at one censoring rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCell {
    pub alternative: DistSpec,
    pub rate: f64,
    pub statistic: StatisticSpec,
    /// Percentage of rejections among successful replicates.
    pub reject_pct: f64,
    /// Monte-Carlo standard error of `reject_pct`, in percentage points.
    pub mc_se: f64,
    /// Replicates that produced a decision.
    pub n_effective: usize,
}

impl PowerCell {
    pub fn degraded(&self, replicates: usize) -> bool {
        (replicates - self.n_effective) as f64 > DEGRADED_FRACTION * replicates as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerTable {
    pub provenance: Provenance,
    pub cells: Vec<PowerCell>,
}

impl PowerTable {
    pub fn cell(&self, alternative: &DistSpec, rate: f64, statistic: &StatisticSpec) -> Option<&PowerCell> {
        self.cells
            .iter()
            .find(|c| c.alternative == *alternative && c.rate == rate && c.statistic == *statistic)
    }
}

/// Reported after each (alternative, rate) group completes.
#[derive(Debug, Clone)]
pub struct Progress<'a> {
    pub alternative: &'a DistSpec,
    pub rate: f64,
    pub done: usize,
    pub total: usize,
    pub elapsed_secs: f64,
}

/// Runs the study on a thread pool of `cfg.threads` workers.
pub fn run_power_study(cfg: &StudyConfig) -> Result<PowerTable> {
    run_power_study_with_progress(cfg, |_| {})
}

/// Runs the study, calling `progress` after each (alternative, rate) group.
///
/// Replicate `r` of alternative `A` at rate `p` uses the stream addressed by
/// `(seed, A, p, r)` for the sample and a child stream for its bootstrap, so
/// the table is bit-identical for any thread budget.
pub fn run_power_study_with_progress<F: FnMut(&Progress)>(cfg: &StudyConfig, mut progress: F) -> Result<PowerTable> {
    cfg.validate()?;
    if cfg.replicates < 100 {
        log::warn!("N = {} replicates is below 100; treat rates as rough", cfg.replicates);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Input(format!("cannot build thread pool: {e}")))?;
    let start = Instant::now();
    let total = cfg.alternatives.len() * cfg.rates.len();
    let mut by_group: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut done = 0;
    for (ai, alt) in cfg.alternatives.iter().enumerate() {
        for (ri, &rate) in cfg.rates.iter().enumerate() {
            let decisions: Vec<Vec<Option<bool>>> =
                pool.install(|| (0..cfg.replicates).into_par_iter().map(|rep| replicate(cfg, alt, rate, rep)).collect());
            let mut rejections = vec![0usize; cfg.statistics.len()];
            let mut effective = vec![0usize; cfg.statistics.len()];
            for row in &decisions {
                for (k, d) in row.iter().enumerate() {
                    if let Some(r) = d {
                        effective[k] += 1;
                        rejections[k] += usize::from(*r);
                    }
                }
            }
            for (k, spec) in cfg.statistics.iter().enumerate() {
                let failed = cfg.replicates - effective[k];
                if failed as f64 > DEGRADED_FRACTION * cfg.replicates as f64 {
                    log::warn!("{} at p = {rate}, {spec}: {failed} of {} replicates failed", alt.label(), cfg.replicates);
                }
            }
            by_group.insert((ai, ri), rejections.into_iter().zip(effective).flat_map(|(r, e)| [r, e]).collect());
            done += 1;
            progress(&Progress { alternative: alt, rate, done, total, elapsed_secs: start.elapsed().as_secs_f64() });
        }
    }
    let mut cells = Vec::with_capacity(total * cfg.statistics.len());
    for (ri, &rate) in cfg.rates.iter().enumerate() {
        for (si, spec) in cfg.statistics.iter().enumerate() {
            for (ai, alt) in cfg.alternatives.iter().enumerate() {
                let counts = &by_group[&(ai, ri)];
                let (rej, eff) = (counts[2 * si], counts[2 * si + 1]);
                let (pct, se) = if eff == 0 {
                    (f64::NAN, f64::NAN)
                } else {
                    let p = rej as f64 / eff as f64;
                    (100.0 * p, 100.0 * (p * (1.0 - p) / eff as f64).sqrt())
                };
                cells.push(PowerCell { alternative: *alt, rate, statistic: *spec, reject_pct: pct, mc_se: se, n_effective: eff });
            }
        }
    }
    Ok(PowerTable {
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            n: cfg.n,
            replicates: cfg.replicates,
            bootstrap: cfg.bootstrap,
            alpha: cfg.alpha,
            hypothesis: cfg.hypothesis,
            seed: cfg.seed,
        },
        cells,
    })
}

/// Seed of one replicate.
pub fn replicate_seed(master: u64, alternative: &DistSpec, rate: f64, rep: usize) -> u64 {
    derive_seed(master, &[label_id(&alternative.to_string()), rate.to_bits(), rep as u64])
}

/// Decisions of every statistic on one simulated sample; `None` marks a failure.
fn replicate(cfg: &StudyConfig, alt: &DistSpec, rate: f64, rep: usize) -> Vec<Option<bool>> {
    let seed = replicate_seed(cfg.seed, alt, rate, rep);
    let sample = match generate_censored_sample(alt, rate, cfg.n, &mut stream(seed, &[0])) {
        Ok(s) => s,
        Err(e) => {
            log::debug!("replicate {rep} of {alt} at p = {rate}: {e}");
            return vec![None; cfg.statistics.len()];
        }
    };
    let mut out = vec![None; cfg.statistics.len()];
    let boot_idx: Vec<usize> =
        (0..cfg.statistics.len()).filter(|&k| cfg.statistics[k].kind != StatKind::AkritasChi2).collect();
    if !boot_idx.is_empty() {
        let specs: Vec<StatisticSpec> = boot_idx.iter().map(|&k| cfg.statistics[k]).collect();
        let bcfg = BootstrapConfig { b: cfg.bootstrap, alpha: cfg.alpha, hypothesis: cfg.hypothesis, seed: derive_seed(seed, &[1]) };
        match bootstrap_tests_each(&sample, &specs, &bcfg) {
            Ok(results) => {
                for (&k, res) in boot_idx.iter().zip(results) {
                    match res {
                        Ok(o) => out[k] = Some(o.reject),
                        Err(e) => log::debug!("replicate {rep} of {alt} at p = {rate}, {}: {e}", cfg.statistics[k]),
                    }
                }
            }
            Err(e) => log::debug!("replicate {rep} of {alt} at p = {rate}: bootstrap failed: {e}"),
        }
    }
    for (k, spec) in cfg.statistics.iter().enumerate() {
        if spec.kind == StatKind::AkritasChi2 {
            match chi2_asymptotic_test(&sample, cfg.hypothesis, spec.r, cfg.alpha) {
                Ok(o) => out[k] = Some(o.reject),
                Err(e) => log::debug!("replicate {rep} of {alt} at p = {rate}, {spec}: {e}"),
            }
        }
    }
    out
}

/// Output format of [`emit_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
    Latex,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "latex" | "tex" => Ok(TableFormat::Latex),
            other => input(format!("unknown table format `{other}` (csv, markdown, latex)")),
        }
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "markdown",
            TableFormat::Latex => "latex",
        })
    }
}

const CSV_COLUMNS: [&str; 12] =
    ["alternative", "theta", "rate", "statistic", "hypothesis", "reject_pct", "mc_se", "n", "N", "B", "seed", "n_effective"];

/// Renders a table. CSV is lossless; markdown and LaTeX follow the layout of
/// published power tables (statistics by alternatives, grouped by rate).
pub fn emit_table(table: &PowerTable, format: TableFormat) -> Result<String> {
    if table.cells.is_empty() {
        return input("cannot render an empty table");
    }
    match format {
        TableFormat::Csv => Ok(emit_csv(table)),
        TableFormat::Markdown => Ok(emit_markdown(table)),
        TableFormat::Latex => Ok(emit_latex(table)),
    }
}

fn header_lines(p: &Provenance) -> Vec<String> {
    let mut lines = vec![
        format!("censored-gof {}", p.version),
        format!("seed = {}", p.seed),
        format!("config_hash = {}", p.config_hash),
        format!("alpha = {}", p.alpha),
    ];
    if let Hypothesis::Simple { mu } = p.hypothesis {
        lines.push(format!("mu = {mu}"));
    }
    lines
}

fn emit_csv(table: &PowerTable) -> String {
    let p = &table.provenance;
    let mut out = String::new();
    for line in header_lines(p) {
        out.push_str(&format!("# {line}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for c in &table.cells {
        w.write_record([
            c.alternative.family.key().to_string(),
            c.alternative.theta.to_string(),
            c.rate.to_string(),
            c.statistic.to_string(),
            p.hypothesis.name().to_string(),
            c.reject_pct.to_string(),
            c.mc_se.to_string(),
            p.n.to_string(),
            p.replicates.to_string(),
            p.bootstrap.to_string(),
            p.seed.to_string(),
            c.n_effective.to_string(),
        ])
        .expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8"));
    out
}

/// Parses the CSV produced by [`emit_table`].
pub fn parse_table_csv(text: &str) -> Result<PowerTable> {
    let mut comments: HashMap<String, String> = HashMap::new();
    let mut version = String::new();
    for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
        let line = line.trim();
        if let Some((k, v)) = line.split_once('=') {
            comments.insert(k.trim().to_string(), v.trim().to_string());
        } else if let Some(v) = line.strip_prefix("censored-gof ") {
            version = v.trim().to_string();
        }
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
        return Err(Error::Parse { line: 1, msg: format!("expected columns {}", CSV_COLUMNS.join(",")) });
    }
    let mut cells = Vec::new();
    let mut meta: Option<(String, usize, usize, usize, u64)> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line() as usize), msg: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |msg: String| Error::Parse { line, msg };
        let f = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| bad(format!("{}: `{}` is not a number", CSV_COLUMNS[i], &rec[i])))
        };
        let u = |i: usize| -> Result<u64> {
            rec[i].parse::<u64>().map_err(|_| bad(format!("{}: `{}` is not an integer", CSV_COLUMNS[i], &rec[i])))
        };
        let family = rec[0].parse().map_err(|e: Error| bad(e.to_string()))?;
        let alternative = DistSpec::new(family, f(1)?).map_err(|e| bad(e.to_string()))?;
        let statistic = rec[3].parse().map_err(|e: Error| bad(e.to_string()))?;
        let row_meta = (rec[4].to_string(), u(7)? as usize, u(8)? as usize, u(9)? as usize, u(10)?);
        match &meta {
            None => meta = Some(row_meta),
            Some(m) if *m != row_meta => return Err(bad("rows disagree on hypothesis, n, N, B or seed".into())),
            _ => {}
        }
        cells.push(PowerCell {
            alternative,
            rate: f(2)?,
            statistic,
            reject_pct: f(5)?,
            mc_se: f(6)?,
            n_effective: u(11)? as usize,
        });
    }
    let Some((hyp, n, replicates, bootstrap, seed)) = meta else {
        return input("table has no rows");
    };
    let num = |key: &str| -> Result<f64> {
        comments
            .get(key)
            .ok_or_else(|| Error::Parse { line: 0, msg: format!("missing `# {key} = ...` header") })?
            .parse()
            .map_err(|_| Error::Parse { line: 0, msg: format!("bad `{key}` header") })
    };
    let hypothesis = match hyp.as_str() {
        "simple" => Hypothesis::Simple { mu: num("mu")? },
        "composite" => Hypothesis::Composite,
        other => return Err(Error::Parse { line: 0, msg: format!("unknown hypothesis `{other}`") }),
    };
    Ok(PowerTable {
        provenance: Provenance {
            version,
            config_hash: comments.get("config_hash").cloned().unwrap_or_default(),
            n,
            replicates,
            bootstrap,
            alpha: num("alpha")?,
            hypothesis,
            seed,
        },
        cells,
    })
}

/// Distinct rates, statistics and alternatives in order of first appearance.
fn axes(table: &PowerTable) -> (Vec<f64>, Vec<StatisticSpec>, Vec<DistSpec>) {
    let mut rates: Vec<f64> = Vec::new();
    let mut stats: Vec<StatisticSpec> = Vec::new();
    let mut alts: Vec<DistSpec> = Vec::new();
    for c in &table.cells {
        if !rates.contains(&c.rate) {
            rates.push(c.rate);
        }
        if !stats.contains(&c.statistic) {
            stats.push(c.statistic);
        }
        if !alts.contains(&c.alternative) {
            alts.push(c.alternative);
        }
    }
    (rates, stats, alts)
}

fn pct(cell: Option<&PowerCell>) -> String {
    match cell {
        Some(c) if c.reject_pct.is_finite() => format!("{:.0}", c.reject_pct),
        Some(_) => "NA".into(),
        None => String::new(),
    }
}

fn emit_markdown(table: &PowerTable) -> String {
    let p = &table.provenance;
    let (rates, stats, alts) = axes(table);
    let mut out = String::new();
    for line in header_lines(p) {
        out.push_str(&format!("<!-- {line} -->\n"));
    }
    out.push_str(&format!(
        "\nPercentage of rejected hypotheses, n = {}, {} hypothesis, N = {}, B = {}, alpha = {}\n",
        p.n,
        p.hypothesis.name(),
        p.replicates,
        p.bootstrap,
        p.alpha
    ));
    for rate in rates {
        out.push_str(&format!("\n### p = {rate}\n\n| Statistic |"));
        for a in &alts {
            out.push_str(&format!(" {} |", a.label()));
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(alts.len()));
        out.push('\n');
        for s in &stats {
            out.push_str(&format!("| {} |", s.label()));
            for a in &alts {
                out.push_str(&format!(" {} |", pct(table.cell(a, rate, s))));
            }
            out.push('\n');
        }
    }
    out
}

fn latex_alt(a: &DistSpec) -> String {
    let label = a.label();
    match label.strip_prefix("Gamma") {
        Some(rest) => format!("$\\Gamma{rest}$"),
        None => format!("${label}$"),
    }
}

fn emit_latex(table: &PowerTable) -> String {
    let p = &table.provenance;
    let (rates, stats, alts) = axes(table);
    let mut out = String::new();
    for line in header_lines(p) {
        out.push_str(&format!("% {line}\n"));
    }
    out.push_str("\\documentclass{article}\n\\usepackage{multirow}\n\\usepackage{graphicx}\n\\begin{document}\n");
    out.push_str("\\begin{table}\n\\centering\n\\scriptsize\n");
    out.push_str(&format!(
        "\\caption{{Percentage of rejected hypotheses for $n={}$ for the {} hypothesis}}\n",
        p.n,
        p.hypothesis.name()
    ));
    out.push_str("\\resizebox{\\textwidth}{!}{\n");
    out.push_str(&format!("\\begin{{tabular}}{{{}}}\n", "c".repeat(alts.len() + 2)));
    out.push_str("p & Alt.");
    for a in &alts {
        out.push_str(&format!(" & \\rotatebox[origin=c]{{90}}{{{}}}", latex_alt(a)));
    }
    out.push_str(" \\\\\\hline\n");
    for rate in rates {
        for (k, s) in stats.iter().enumerate() {
            if k == 0 {
                out.push_str(&format!("\\multirow{{{}}}{{*}}{{{rate}}}", stats.len()));
            }
            out.push_str(&format!(" & {}", s.latex_label()));
            for a in &alts {
                out.push_str(&format!(" & {}", pct(table.cell(a, rate, s))));
            }
            out.push_str(" \\\\\n");
        }
        out.push_str("\\hline\n");
    }
    out.push_str("\\end{tabular}}\n\\end{table}\n\\end{document}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Characterization;

    const SMALL: &str = "\
# small study
n = 20
N = 12
B = 100
rates = 0.1, 0.3
alternatives = exp:1, weibull:1.4
statistics = J:PR:a=1, delta, chi2:r=3
seed = 7
";

    #[test]
    fn parse_config() {
        let cfg = StudyConfig::parse(SMALL).unwrap();
        assert_eq!(cfg.n, 20);
        assert_eq!(cfg.replicates, 12);
        assert_eq!(cfg.bootstrap, 100);
        assert_eq!(cfg.rates, vec![0.1, 0.3]);
        assert_eq!(cfg.alternatives.len(), 2);
        assert_eq!(cfg.statistics[0], StatisticSpec::j(Characterization::PuriRubin, 1.0));
        assert_eq!(cfg.hypothesis, Hypothesis::Simple { mu: 1.0 });
        assert_eq!(StudyConfig::parse(&cfg.canonical()).unwrap(), cfg);
        let with_threads = format!("{SMALL}threads = 3\n");
        let t = StudyConfig::parse(&with_threads).unwrap();
        assert_eq!(t.threads, 3);
        assert_eq!(t.hash(), cfg.hash());
    }

    #[test]
    fn schema_errors() {
        let missing = SMALL.replace("alternatives = exp:1, weibull:1.4\n", "");
        match StudyConfig::parse(&missing) {
            Err(Error::Schema { msg, valid }) => {
                assert!(msg.contains("alternatives"));
                assert!(valid.contains("statistics"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(StudyConfig::parse(&format!("{SMALL}replicates = 3\n")), Err(Error::Schema { .. })));
        assert!(matches!(StudyConfig::parse(&format!("{SMALL}n = 3\n")), Err(Error::Schema { .. })));
        assert!(matches!(StudyConfig::parse(&format!("{SMALL}oops\n")), Err(Error::Parse { line: 9, .. })));
        assert!(StudyConfig::parse(&SMALL.replace("0.3", "0.5")).is_err());
        assert!(StudyConfig::parse(&SMALL.replace("B = 100", "B = 10")).is_err());
        assert!(StudyConfig::parse(&format!("{SMALL}hypothesis = composite\nmu = 2\n")).is_err());
    }

    fn small_table() -> PowerTable {
        run_power_study(&StudyConfig::parse(SMALL).unwrap()).unwrap()
    }

    #[test]
    fn table_shape_and_csv_round_trip() {
        let table = small_table();
        assert_eq!(table.cells.len(), 2 * 3 * 2);
        for c in &table.cells {
            assert!((0.0..=100.0).contains(&c.reject_pct));
            let p = c.reject_pct / 100.0;
            assert!((c.mc_se - 100.0 * (p * (1.0 - p) / c.n_effective as f64).sqrt()).abs() < 1e-12);
        }
        let csv = emit_table(&table, TableFormat::Csv).unwrap();
        assert!(csv.lines().any(|l| l.starts_with("alternative,theta,rate,statistic,hypothesis,reject_pct,mc_se,n,N,B,seed")));
        assert_eq!(parse_table_csv(&csv).unwrap(), table);
        let md = emit_table(&table, TableFormat::Markdown).unwrap();
        assert!(md.contains("### p = 0.3") && md.contains("W(1.4)"));
        let tex = emit_table(&table, TableFormat::Latex).unwrap();
        assert_eq!(tex.matches("\\begin{").count(), tex.matches("\\end{").count());
        assert!(tex.contains("\\widehat{J}"));
    }

    #[test]
    fn empty_table_is_rejected() {
        let mut table = small_table();
        table.cells.clear();
        assert!(emit_table(&table, TableFormat::Csv).is_err());
    }

    #[test]
    fn thread_budget_does_not_change_results() {
        let mut cfg = StudyConfig::parse(SMALL).unwrap();
        cfg.threads = 1;
        let a = run_power_study(&cfg).unwrap();
        cfg.threads = 4;
        let b = run_power_study(&cfg).unwrap();
        assert_eq!(emit_table(&a, TableFormat::Csv).unwrap(), emit_table(&b, TableFormat::Csv).unwrap());
    }
}
