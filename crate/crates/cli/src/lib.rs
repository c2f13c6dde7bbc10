//! Command-line front end: `decompose`, `verify` and `synth`.
//!
//! Exit codes: 0 success, 1 invalid input or arguments, 2 I/O failure,
//! 3 numerical failure or a failed verification check.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use mcissa::analysis::{
    eigenvector_weights, frequency_contributions, participation, series_subcomponent_contributions,
    subcomponent_contributions,
};
use mcissa::decomposition::{uniqueness_against, McissaFit};
use mcissa::grouping::{GroupingSpec, ResolvedGrouping, RESIDUAL};
use mcissa::moments::check_window;
use mcissa::panel::{format_value, label_range, rebase_index};
use mcissa::spectral::{num_frequencies, period, phase_segments};
use mcissa::{demean, load_panel, write_panel, ErrorClass, IngestOptions, TimeSeriesPanel};

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "mcissa",
    version,
    about = "Multivariate circulant singular spectrum analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose a panel into grouped frequency components and tables.
    Decompose(DecomposeArgs),
    /// Run the numerical self-checks on a panel.
    Verify(VerifyArgs),
    /// Generate a synthetic panel from a TOML recipe.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file: one column per series, optional time-label column.
    #[arg(long)]
    pub input: PathBuf,
    /// Window length L, with 1 < L <= T/2.
    #[arg(long, short = 'L')]
    pub window_length: usize,
    /// Name of the time-label column, if present.
    #[arg(long, default_value = "date")]
    pub label_column: String,
    /// Keep series means instead of subtracting them.
    #[arg(long)]
    pub no_demean: bool,
    /// Rescale each series to 100 over a base period: a 0-based
    /// half-open row range `a..b`, or a time-label prefix such as `2010`.
    #[arg(long)]
    pub rebase: Option<String>,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Grouping, e.g. `trend:k=1; cycle:period=64..128`. Unassigned pairs
    /// go to `residual`.
    #[arg(long, default_value = "trend:k=1")]
    pub groups: String,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Comma list of: components, elementary, tables, phase, uniqueness.
    #[arg(long, default_value = "components,tables")]
    pub emit: String,
    /// Do not add the removed means back to the group holding the trend.
    #[arg(long)]
    pub no_restore_mean: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub recipe: PathBuf,
    /// Number of series M.
    #[arg(long)]
    pub series: usize,
    /// Number of time points T.
    #[arg(long)]
    pub length: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the recipe's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// A failure with its exit code and a one-line message.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<mcissa::Error> for CliError {
    fn from(e: mcissa::Error) -> Self {
        let code = match e.class() {
            ErrorClass::Io => EXIT_IO,
            ErrorClass::Validation => EXIT_VALIDATION,
            ErrorClass::Numerical => EXIT_NUMERICAL,
        };
        CliError::new(code, e.to_string().replace('\n', " "))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub components: bool,
    pub elementary: bool,
    pub tables: bool,
    pub phase: bool,
    pub uniqueness: bool,
}

impl Emit {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut emit = Emit {
            components: false,
            elementary: false,
            tables: false,
            phase: false,
            uniqueness: false,
        };
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "components" => emit.components = true,
                "elementary" => emit.elementary = true,
                "tables" => emit.tables = true,
                "phase" => emit.phase = true,
                "uniqueness" => emit.uniqueness = true,
                other => {
                    return Err(CliError::new(
                        EXIT_VALIDATION,
                        format!(
                            "unknown --emit item {other:?}; expected components, elementary, tables, phase or uniqueness"
                        ),
                    ))
                }
            }
        }
        Ok(emit)
    }

    fn names(&self) -> Vec<&'static str> {
        [
            (self.components, "components"),
            (self.elementary, "elementary"),
            (self.tables, "tables"),
            (self.phase, "phase"),
            (self.uniqueness, "uniqueness"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect()
    }
}

/// Parses and runs a command line, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", line.trim_start_matches("error: "));
            return EXIT_VALIDATION;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Decompose(args) => cmd_decompose(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Synth(args) => cmd_synth(&args),
    }
}

fn parse_range(text: &str) -> Option<Range<usize>> {
    let (a, b) = text.split_once("..")?;
    Some(a.trim().parse().ok()?..b.trim().parse().ok()?)
}

/// Loads, rebases and (optionally) demeans the input panel, and checks the
/// window length before anything expensive happens.
fn prepare(args: &InputArgs) -> CliResult<TimeSeriesPanel> {
    let options = IngestOptions {
        label_column: args.label_column.clone(),
    };
    let mut panel = load_panel(&args.input, &options)?;
    check_window(args.window_length, panel.len())?;
    if let Some(spec) = &args.rebase {
        let range = match parse_range(spec) {
            Some(r) => r,
            None => label_range(&panel, spec)?,
        };
        panel = rebase_index(&panel, range)?;
    }
    if !args.no_demean {
        panel = demean(&panel);
    }
    Ok(panel)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Output files collected in memory and written only once everything has
/// been computed.
#[derive(Default)]
struct Outputs {
    files: BTreeMap<String, Vec<u8>>,
}

impl Outputs {
    fn add(&mut self, path: String, bytes: Vec<u8>) {
        self.files.insert(path, bytes);
    }

    fn add_panel(&mut self, path: String, panel: &TimeSeriesPanel) -> CliResult<()> {
        let mut buf = Vec::new();
        write_panel(panel, &mut buf)?;
        self.add(path, buf);
        Ok(())
    }

    fn add_table(&mut self, path: &str, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::new(EXIT_IO, format!("cannot format {path}: {e}"));
        wtr.write_record(header).map_err(fail)?;
        for row in rows {
            wtr.write_record(row).map_err(fail)?;
        }
        let bytes = wtr
            .into_inner()
            .map_err(|e| CliError::new(EXIT_IO, format!("cannot format {path}: {e}")))?;
        self.add(path.to_string(), bytes);
        Ok(())
    }

    fn write_all(&self, dir: &Path) -> CliResult<()> {
        for (rel, bytes) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| {
                    CliError::new(EXIT_IO, format!("cannot create {}: {e}", parent.display()))
                })?;
            }
            std::fs::write(&path, bytes).map_err(|e| {
                CliError::new(EXIT_IO, format!("cannot write {}: {e}", path.display()))
            })?;
        }
        Ok(())
    }
}

fn header(fixed: &[&str], rest: impl IntoIterator<Item = String>) -> Vec<String> {
    fixed.iter().map(|s| s.to_string()).chain(rest).collect()
}

fn period_text(k: usize, l: usize) -> String {
    let p = period(k, l);
    if p.is_infinite() {
        "inf".into()
    } else {
        format_value(p)
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn tables(fit: &McissaFit, out: &mut Outputs) -> CliResult<()> {
    let l = fit.window();
    let dim = fit.dim();
    let names = fit.panel().names().to_vec();
    let ks = 1..=num_frequencies(l);
    let subs = || (1..=dim).map(|m| format!("m{m}"));

    let contributions = frequency_contributions(fit.spectra())?;
    let rows: Vec<Vec<String>> = contributions
        .rows
        .iter()
        .map(|r| vec![r.k.to_string(), period_text(r.k, l), format_value(r.share)])
        .collect();
    out.add_table(
        "tables/frequency_contributions.csv",
        &header(&["k", "period", "share"], []),
        &rows,
    )?;

    let mut rows = Vec::new();
    for k in ks.clone() {
        let mut row = vec![k.to_string(), period_text(k, l)];
        match subcomponent_contributions(fit.spectra(), k) {
            Ok(c) => row.extend(c.into_iter().map(format_value)),
            Err(_) => row.extend((0..dim).map(|_| String::new())),
        }
        rows.push(row);
    }
    out.add_table(
        "tables/subcomponent_contributions.csv",
        &header(&["k", "period"], subs()),
        &rows,
    )?;

    let mut rows = Vec::new();
    for k in ks.clone() {
        for m in 1..=dim {
            let mut row = vec![
                k.to_string(),
                m.to_string(),
                format_value(fit.spectra().eigenvalues(k)[m - 1]),
            ];
            row.extend(
                eigenvector_weights(fit.spectra(), k, m)?
                    .into_iter()
                    .map(format_value),
            );
            rows.push(row);
        }
    }
    out.add_table(
        "tables/eigenvector_weights.csv",
        &header(&["k", "m", "eigenvalue"], names.iter().cloned()),
        &rows,
    )?;

    let pi = participation(fit.basis());
    let mut rows = Vec::new();
    for k in ks.clone() {
        for m in 1..=dim {
            let mut row = vec![k.to_string(), m.to_string()];
            row.extend(pi.series(k, m).iter().copied().map(format_value));
            rows.push(row);
        }
    }
    out.add_table(
        "tables/participation.csv",
        &header(&["k", "m"], names.iter().cloned()),
        &rows,
    )?;

    let mut rows = Vec::new();
    for k in ks {
        for (i, shares) in series_subcomponent_contributions(fit, k)?
            .into_iter()
            .enumerate()
        {
            let mut row = vec![k.to_string(), names[i].clone()];
            row.extend(
                shares
                    .into_iter()
                    .map(|s| s.map(format_value).unwrap_or_default()),
            );
            rows.push(row);
        }
    }
    out.add_table(
        "tables/series_subcomponent_contributions.csv",
        &header(&["k", "series"], subs()),
        &rows,
    )?;
    Ok(())
}

fn phases(fit: &McissaFit, grouping: &ResolvedGrouping, out: &mut Outputs) -> CliResult<()> {
    let l = fit.window();
    let names = fit.panel().names().to_vec();
    let mut phase_rows = Vec::new();
    let mut segment_rows = Vec::new();
    for k in 1..=num_frequencies(l) {
        for m in 1..=fit.dim() {
            let ph = phase_segments(fit.basis(), fit.spectra(), k, m)?;
            let mut row = vec![k.to_string(), period_text(k, l), m.to_string()];
            row.extend(
                ph.phases
                    .iter()
                    .map(|p| p.map(format_value).unwrap_or_default()),
            );
            phase_rows.push(row);
            if grouping.group_of(k, m).is_some_and(|g| g != RESIDUAL) {
                for lag in 0..l {
                    let mut row = vec![k.to_string(), m.to_string(), lag.to_string()];
                    row.extend(ph.segments.iter().map(|s| format_value(s[lag])));
                    segment_rows.push(row);
                }
            }
        }
    }
    out.add_table(
        "phase/phases.csv",
        &header(&["k", "period", "m"], names.iter().cloned()),
        &phase_rows,
    )?;
    out.add_table(
        "phase/segments.csv",
        &header(&["k", "m", "lag"], names.iter().cloned()),
        &segment_rows,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct ManifestGroup {
    name: String,
    pairs: Vec<[usize; 2]>,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    input: String,
    input_sha256: String,
    series: Vec<String>,
    length: usize,
    window_length: usize,
    demean: bool,
    restore_mean: bool,
    rebase: Option<String>,
    groups_spec: String,
    groups: Vec<ManifestGroup>,
    emit: Vec<&'static str>,
    files: BTreeMap<String, String>,
}

pub fn cmd_decompose(args: &DecomposeArgs) -> CliResult<()> {
    let emit = Emit::parse(&args.emit)?;
    let input = &args.input;
    let panel = prepare(input)?;
    let spec = GroupingSpec::parse(&args.groups)?;
    let grouping = spec.resolve(input.window_length, panel.dim())?;

    let mut fit = McissaFit::new(&panel, input.window_length)?;
    if input.inject_fault {
        fit.inject_basis_fault();
    }
    let set = fit.decompose(&grouping, emit.elementary)?;
    let mut out = Outputs::default();

    let restore = !input.no_demean && !args.no_restore_mean;
    if emit.components {
        let trend_group = grouping.group_of(1, 1).map(str::to_string);
        for (name, comp) in &set.components {
            let comp = match (restore, panel.means(), &trend_group) {
                (true, Some(means), Some(g)) if g == name => {
                    let mut values = comp.values().clone();
                    for (i, mean) in means.iter().enumerate() {
                        values.row_mut(i).add_scalar_mut(*mean);
                    }
                    comp.with_values(values)?
                }
                _ => comp.clone(),
            };
            out.add_panel(format!("components/{}.csv", file_stem(name)), &comp)?;
        }
    }
    if let Some(elementary) = &set.elementary {
        for ((k, m), comp) in elementary {
            out.add_panel(format!("elementary/k{k:03}_m{m:02}.csv"), comp)?;
        }
    }
    if emit.tables {
        tables(&fit, &mut out)?;
    }
    if emit.phase {
        phases(&fit, &grouping, &mut out)?;
    }
    if emit.uniqueness {
        let report = uniqueness_against(&fit)?;
        let mut rows = Vec::new();
        for (i, row) in report.discrepancies.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                rows.push(vec![
                    panel.names()[i].clone(),
                    (j + 1).to_string(),
                    format_value(*d),
                    format_value(d / (1.0 + report.amplitudes[i])),
                ]);
            }
        }
        out.add_table(
            "uniqueness.csv",
            &header(&["series", "k", "discrepancy", "scaled"], []),
            &rows,
        )?;
    }

    let raw = std::fs::read(&input.input).map_err(|e| {
        CliError::new(
            EXIT_IO,
            format!("cannot read {}: {e}", input.input.display()),
        )
    })?;
    let manifest = Manifest {
        tool: "mcissa",
        version: env!("CARGO_PKG_VERSION"),
        command: "decompose",
        input: input.input.display().to_string(),
        input_sha256: sha256_hex(&raw),
        series: panel.names().to_vec(),
        length: panel.len(),
        window_length: input.window_length,
        demean: !input.no_demean,
        restore_mean: restore,
        rebase: input.rebase.clone(),
        groups_spec: spec.to_string(),
        groups: grouping
            .groups
            .iter()
            .map(|(name, pairs)| ManifestGroup {
                name: name.clone(),
                pairs: pairs.iter().map(|&(k, m)| [k, m]).collect(),
            })
            .collect(),
        emit: emit.names(),
        files: out
            .files
            .iter()
            .map(|(p, b)| (p.clone(), sha256_hex(b)))
            .collect(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| CliError::new(EXIT_IO, format!("cannot format manifest: {e}")))?;
    json.push(b'\n');
    out.add("manifest.json".into(), json);
    out.write_all(&args.out_dir)
}

/// Renders the verification table.
pub fn format_report(report: &mcissa::verify::VerifyReport) -> String {
    let mut s = format!(
        "{:<20} {:>12} {:>12}  {}\n",
        "check", "measured", "tolerance", "result"
    );
    for c in &report.checks {
        let _ = writeln!(
            s,
            "{:<20} {:>12.3e} {:>12.0e}  {}",
            c.name,
            c.measured,
            c.tolerance,
            if c.passed { "pass" } else { "FAIL" }
        );
    }
    s
}

pub fn cmd_verify(args: &VerifyArgs) -> CliResult<()> {
    let input = &args.input;
    let panel = prepare(input)?;
    let report = mcissa::verify::verify(&panel, input.window_length, input.inject_fault)?;
    print!("{}", format_report(&report));
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect();
        Err(CliError::new(
            EXIT_NUMERICAL,
            format!("verification failed: {}", failed.join(", ")),
        ))
    }
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let mut recipe = mcissa::SignalRecipe::load(&args.recipe)?;
    if let Some(seed) = args.seed {
        recipe.seed = seed;
    }
    let synth = mcissa::generate(&recipe, args.series, args.length)?;
    let mut out = Outputs::default();
    out.add_panel("mixed.csv".into(), &synth.mixed)?;
    for (j, (kind, truth)) in synth.truths.iter().enumerate() {
        out.add_panel(format!("truth_{:02}_{kind}.csv", j + 1), truth)?;
    }
    out.write_all(&args.out_dir)
}
