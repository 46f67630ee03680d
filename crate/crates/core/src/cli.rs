//! Command-line front end.
//!
//! One subcommand per experiment. Tabular results go to CSV with a leading
//! `# {metadata}` comment line; summaries go to JSON objects with a
//! `metadata` member. Both embed the tool version, seed and full parsed
//! configuration, and contain no timestamps, so identical invocations produce
//! identical files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::asymptotics::{derivative_ratio, normal_sweep, DEFAULT_FAR_FIELD_SEPARATION};
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Domain, ImplicitDomain, Point, Polynomial, PolynomialField};
use crate::harmonic_measure::{cap_area, sample_exits, WosConfig, WosKernel};
use crate::model_kernels::{harmonic_extend, KernelEvaluator, ModelKernel};
use crate::scaling::scale_diagnostic;

pub const TOOL_NAME: &str = "poisson-asym";
pub const OUT_DIR_ENV: &str = "POISSON_ASYM_OUT_DIR";

/// On-disk domain description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<Vec<f64>>,
    /// Monomial exponent tuple (e.g. "2,0" or "[2,0]") to coefficient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<BTreeMap<String, f64>>,
    /// [[lo...], [hi...]]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounding_box: Option<[Vec<f64>; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interior_witness: Option<Vec<f64>>,
}

fn parse_exponents(key: &str, dim: usize) -> Result<Vec<u32>> {
    let trimmed = key
        .trim()
        .trim_start_matches(['[', '('])
        .trim_end_matches([']', ')']);
    let exps = trimmed
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidInput(format!("bad monomial exponent tuple {key:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if exps.len() != dim {
        return Err(Error::InvalidInput(format!(
            "monomial {key:?} has {} exponents, expected {dim}",
            exps.len()
        )));
    }
    Ok(exps)
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        let dim = self.dim;
        if dim < 2 {
            return Err(Error::InvalidInput(format!(
                "dimension must be >= 2, got {dim}"
            )));
        }
        match self.kind.as_str() {
            "ball" => {
                let radius = self
                    .radius
                    .ok_or_else(|| Error::InvalidInput("ball needs a radius".into()))?;
                let center = self.center.clone().unwrap_or_else(|| vec![0.0; dim]);
                if center.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: center.len(),
                    });
                }
                Domain::ball(Point::new(center), radius)
            }
            "halfspace" => Domain::halfspace(dim),
            "ellipse" => {
                let axes = self
                    .semi_axes
                    .clone()
                    .ok_or_else(|| Error::InvalidInput("ellipse needs semi_axes".into()))?;
                if axes.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: axes.len(),
                    });
                }
                Domain::ellipse(axes)
            }
            "implicit_polynomial" => {
                let coefficients = self.coefficients.as_ref().ok_or_else(|| {
                    Error::InvalidInput("implicit_polynomial needs coefficients".into())
                })?;
                let terms = coefficients
                    .iter()
                    .map(|(k, c)| Ok((parse_exponents(k, dim)?, *c)))
                    .collect::<Result<Vec<_>>>()?;
                let poly = Polynomial::new(dim, terms)?;
                let [lo, hi] = self.bounding_box.clone().ok_or_else(|| {
                    Error::InvalidInput("implicit_polynomial needs a bounding_box".into())
                })?;
                let bbox = BoundingBox::new(Point::new(lo), Point::new(hi))?;
                let witness = Point::new(
                    self.interior_witness
                        .clone()
                        .unwrap_or_else(|| vec![0.0; dim]),
                );
                Ok(Domain::implicit(ImplicitDomain::from_polynomial(
                    PolynomialField::new(poly),
                    bbox,
                    witness,
                )?))
            }
            other => Err(Error::InvalidInput(format!(
                "unknown domain kind {other:?}"
            ))),
        }
    }
}

/// Parses and validates a domain specification document.
pub fn parse_domain_spec(text: &str) -> Result<Domain> {
    let spec: DomainSpec = serde_json::from_str(text)
        .map_err(|e| Error::InvalidInput(format!("malformed domain spec: {e}")))?;
    spec.build()
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let coords = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Point::try_new(coords).map_err(|e| e.to_string())
}

#[derive(Debug, Parser, Serialize)]
#[command(name = TOOL_NAME, version, about = "Poisson kernel asymptotics toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Evaluate the closed-form kernel of a ball or halfspace.
    Kernel(KernelArgs),
    /// Poisson integral of boundary data at an interior point.
    Extend(ExtendArgs),
    /// Boundary scaling diagnostics for a list of ε.
    Scale(ScaleArgs),
    /// Walk-on-spheres cap measures and kernel densities.
    Wos(WosArgs),
    /// Sweep of P·|x−y|^d/δ along the inward normal at a base point.
    Ratio(RatioArgs),
    /// Direction-resolved derivative ratios of a closed-form kernel.
    Derivative(DerivativeArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Kernel(_) => "kernel",
            Command::Extend(_) => "extend",
            Command::Scale(_) => "scale",
            Command::Wos(_) => "wos",
            Command::Ratio(_) => "ratio",
            Command::Derivative(_) => "derivative",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::Kernel(a) => &a.common,
            Command::Extend(a) => &a.common,
            Command::Scale(a) => &a.common,
            Command::Wos(a) => &a.common,
            Command::Ratio(a) => &a.common,
            Command::Derivative(a) => &a.common,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CommonArgs {
    /// Domain specification file (JSON).
    #[arg(long)]
    pub domain: PathBuf,
    /// Output file. Defaults to $POISSON_ASYM_OUT_DIR/<command>.<ext>.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct KernelArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Interior point, comma separated.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
    pub x: Point,
    /// Boundary points, `;` separated.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ';', value_parser = parse_point)]
    pub t: Vec<Point>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryData {
    /// f ≡ 1
    One,
    /// f(t) = t_1
    X1,
    /// f(t) = t_2
    X2,
    /// f(t) = t_3
    X3,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtendArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
    pub x: Point,
    #[arg(long, default_value_t = 1024)]
    pub resolution: usize,
    #[arg(long, value_enum, default_value_t = BoundaryData::One)]
    pub data: BoundaryData,
    /// Truncation radius for halfspace boundaries.
    #[arg(long)]
    pub truncation: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScaleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Base point on the boundary; defaults to the point with normal +e_d.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
    pub base: Option<Point>,
    /// Dilation parameters ε.
    #[arg(long, value_delimiter = ',', required = true)]
    pub deltas: Vec<f64>,
    /// Radius of the s-ball over which the linearization gap is taken.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct WosControls {
    #[arg(long, default_value_t = 100_000)]
    pub walkers: usize,
    /// Stop tolerance; defaults to 1e-4 × diameter.
    #[arg(long = "stop-tol")]
    pub stop_tol: Option<f64>,
    #[arg(long = "max-steps")]
    pub max_steps: Option<usize>,
    #[arg(long = "cap-radius", default_value_t = 0.02)]
    pub cap_radius: f64,
    /// Truncation radius (required for the halfspace).
    #[arg(long)]
    pub truncation: Option<f64>,
}

impl WosControls {
    fn config(&self, domain: &Domain, seed: u64) -> Result<WosConfig> {
        let mut cfg = match (domain.diameter(), self.truncation) {
            (None, Some(t)) => WosConfig::truncated(self.walkers, seed, t),
            (None, None) => {
                return Err(Error::InvalidInput(
                    "halfspace walks need --truncation".into(),
                ))
            }
            (Some(_), t) => {
                let mut c = WosConfig::new(domain, self.walkers, seed)?;
                c.truncation_radius = t;
                c
            }
        };
        if let Some(s) = self.stop_tol {
            cfg.stop_tolerance = s;
        }
        if let Some(m) = self.max_steps {
            cfg.max_steps = m;
        }
        cfg.validate(domain)?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct WosArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
    pub x: Point,
    /// Cap centres on the boundary, `;` separated.
    #[arg(long = "cap-center", allow_hyphen_values = true, value_delimiter = ';', value_parser = parse_point)]
    pub cap_center: Vec<Point>,
    #[command(flatten)]
    pub wos: WosControls,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Exact,
    Wos,
}

#[derive(Debug, Args, Serialize)]
pub struct RatioArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
    pub base: Option<Point>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub deltas: Vec<f64>,
    /// Boundary targets, `;` separated; defaults to the base point.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ';', value_parser = parse_point)]
    pub targets: Vec<Point>,
    #[arg(long, value_enum, default_value_t = KernelChoice::Exact)]
    pub kernel: KernelChoice,
    #[arg(long = "far-field", default_value_t = DEFAULT_FAR_FIELD_SEPARATION)]
    pub far_field: f64,
    /// JSON summary path; defaults to the CSV path with a .json extension.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub wos: WosControls,
}

#[derive(Debug, Args, Serialize)]
pub struct DerivativeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
    pub x: Point,
    /// Boundary points, `;` separated.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ';', value_parser = parse_point)]
    pub y: Vec<Point>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1u32])]
    pub orders: Vec<u32>,
    /// Unit directions, `;` separated; defaults to the boundary frame axes at
    /// the foot of x.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ';', value_parser = parse_point)]
    pub direction: Vec<Point>,
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn output_path(command: &Command, ext: &str) -> Result<PathBuf> {
    if let Some(p) = &command.common().out {
        return Ok(p.clone());
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => Ok(PathBuf::from(dir).join(format!("{}.{ext}", command.name()))),
        None => Err(Error::InvalidInput(format!(
            "no --out given and {OUT_DIR_ENV} is not set"
        ))),
    }
}

fn metadata(command: &Command, domain_spec: &serde_json::Value) -> serde_json::Value {
    json!({
        "tool": TOOL_NAME,
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "seed": command.common().seed,
        "domain_spec": domain_spec,
        "config": command,
    })
}

fn csv_with_metadata(meta: &serde_json::Value, body: &str) -> String {
    format!("# {meta}\n{body}")
}

fn json_with_metadata(meta: &serde_json::Value, result: serde_json::Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&json!({ "metadata": meta, "result": result }))?;
    s.push('\n');
    Ok(s)
}

fn fmt_point(p: &Point) -> String {
    p.coords()
        .iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Boundary inputs given with limited decimals are projected onto the
/// boundary when they lie within this distance of it.
pub const BOUNDARY_SNAP_TOLERANCE: f64 = 1e-3;

fn snap_to_boundary(domain: &Domain, p: &Point) -> Result<Point> {
    if domain.check_on_boundary(p).is_ok() {
        return Ok(p.clone());
    }
    let sd = domain.signed_distance(p)?;
    if sd.abs() > BOUNDARY_SNAP_TOLERANCE {
        return Err(Error::NotOnBoundary { residual: sd.abs() });
    }
    Ok(domain.project_to_boundary(p)?.foot)
}

fn snap_all(domain: &Domain, points: &[Point]) -> Result<Vec<Point>> {
    points.iter().map(|p| snap_to_boundary(domain, p)).collect()
}

fn require_seed(command: &Command) -> Result<u64> {
    command
        .common()
        .seed
        .ok_or_else(|| Error::InvalidInput("--seed is required for walk-on-spheres runs".into()))
}

/// Executes one parsed command.
pub fn run(cli: &Cli) -> Result<()> {
    let command = &cli.command;
    let spec_text = fs::read_to_string(&command.common().domain).map_err(|e| {
        Error::InvalidInput(format!(
            "cannot read domain spec {}: {e}",
            command.common().domain.display()
        ))
    })?;
    let domain = parse_domain_spec(&spec_text)?;
    let spec_value: serde_json::Value = serde_json::from_str(&spec_text)?;
    let meta = metadata(command, &spec_value);

    match command {
        Command::Kernel(args) => {
            let kernel = ModelKernel::new(domain.clone())?;
            if args.t.is_empty() {
                return Err(Error::InvalidInput("at least one --t is required".into()));
            }
            let mut body = String::from("t_index,t,kernel\n");
            for (i, t) in snap_all(&domain, &args.t)?.iter().enumerate() {
                let v = kernel.value(&args.x, t)?;
                body.push_str(&format!("{i},{},{v:e}\n", fmt_point(t)));
            }
            write_atomic(
                &output_path(command, "csv")?,
                &csv_with_metadata(&meta, &body),
            )
        }
        Command::Extend(args) => {
            let data = args.data;
            let f = move |t: &Point| match data {
                BoundaryData::One => 1.0,
                BoundaryData::X1 => t[0],
                BoundaryData::X2 => t[1],
                BoundaryData::X3 => t[2],
            };
            if matches!(data, BoundaryData::X3) && domain.dim() < 3 {
                return Err(Error::InvalidInput("x3 data needs d >= 3".into()));
            }
            let v = harmonic_extend(&domain, f, &args.x, args.resolution, args.truncation)?;
            write_atomic(
                &output_path(command, "json")?,
                &json_with_metadata(&meta, serde_json::to_value(v)?)?,
            )
        }
        Command::Scale(args) => {
            let base = match &args.base {
                Some(b) => snap_to_boundary(&domain, b)?,
                None => domain.default_base()?,
            };
            let rows = args
                .deltas
                .iter()
                .map(|&eps| scale_diagnostic(&domain, &base, eps, args.radius))
                .collect::<Result<Vec<_>>>()?;
            let gaps: Vec<f64> = rows.iter().map(|r| r.linearization_gap).collect();
            let result = json!({
                "base": base,
                "radius": args.radius,
                "linearization_gaps": gaps,
                "diagnostics": rows,
            });
            write_atomic(
                &output_path(command, "json")?,
                &json_with_metadata(&meta, result)?,
            )
        }
        Command::Wos(args) => {
            let seed = require_seed(command)?;
            let cfg = args.wos.config(&domain, seed)?;
            if args.cap_center.is_empty() {
                return Err(Error::InvalidInput(
                    "at least one --cap-center is required".into(),
                ));
            }
            let caps = snap_all(&domain, &args.cap_center)?;
            let sample = sample_exits(&domain, &args.x, &cfg)?;
            let mut body = String::from(
                "cap_index,cap_center,cap_radius,hits,measure,measure_std_error,density,density_std_error,wide_interval,walkers,truncated\n",
            );
            for (i, c) in caps.iter().enumerate() {
                let m = sample.cap_measure(c, args.wos.cap_radius);
                let (density, density_se) = match cap_area(&domain, c, args.wos.cap_radius) {
                    Ok(area) => (
                        format!("{:e}", m.estimate / area),
                        format!("{:e}", m.std_error / area),
                    ),
                    Err(Error::Unsupported { .. }) => (String::new(), String::new()),
                    Err(e) => return Err(e),
                };
                body.push_str(&format!(
                    "{i},{},{:e},{},{:e},{:e},{density},{density_se},{},{},{}\n",
                    fmt_point(c),
                    args.wos.cap_radius,
                    m.hits,
                    m.estimate,
                    m.std_error,
                    m.wide_interval,
                    m.walkers_used,
                    m.truncated_walks,
                ));
            }
            write_atomic(
                &output_path(command, "csv")?,
                &csv_with_metadata(&meta, &body),
            )
        }
        Command::Ratio(args) => {
            let base = match &args.base {
                Some(b) => snap_to_boundary(&domain, b)?,
                None => domain.default_base()?,
            };
            let targets = if args.targets.is_empty() {
                vec![base.clone()]
            } else {
                snap_all(&domain, &args.targets)?
            };
            let kernel: Box<dyn KernelEvaluator> = match args.kernel {
                KernelChoice::Exact => Box::new(ModelKernel::new(domain.clone())?),
                KernelChoice::Wos => {
                    let seed = require_seed(command)?;
                    let cfg = args.wos.config(&domain, seed)?;
                    Box::new(WosKernel::new(domain.clone(), cfg, args.wos.cap_radius)?)
                }
            };
            let report = normal_sweep(
                &domain,
                kernel.as_ref(),
                &base,
                &args.deltas,
                &targets,
                args.far_field,
            )?;
            let out = output_path(command, "csv")?;
            let summary_path = args
                .summary
                .clone()
                .unwrap_or_else(|| out.with_extension("json"));
            let summary = json!({
                "c1_hat": report.c1_hat,
                "c2_hat": report.c2_hat,
                "band": report.band,
                "near_field": report.near_field,
                "far_field": report.far_field,
                "grid": report.grid,
                "domain": report.domain,
                "seed": command.common().seed,
                "records": report.records.len(),
            });
            write_atomic(&out, &csv_with_metadata(&meta, &report.to_csv()))?;
            write_atomic(&summary_path, &json_with_metadata(&meta, summary)?)
        }
        Command::Derivative(args) => {
            let kernel = ModelKernel::new(domain.clone())?;
            if args.y.is_empty() {
                return Err(Error::InvalidInput("at least one --y is required".into()));
            }
            let directions = if args.direction.is_empty() {
                let normal = domain.project_to_boundary(&args.x)?.inward_normal;
                let q = crate::geometry::frame::rotation_to_last_axis(&normal);
                (0..domain.dim()).map(|i| q.row(i)).collect()
            } else {
                args.direction
                    .iter()
                    .map(|d| {
                        d.normalized()
                            .ok_or_else(|| Error::InvalidInput("zero direction".into()))
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            let mut rows = Vec::new();
            for y in &snap_all(&domain, &args.y)? {
                for &order in &args.orders {
                    for dir in &directions {
                        rows.push(derivative_ratio(&kernel, &args.x, y, order, dir)?);
                    }
                }
            }
            let flagged = rows.iter().any(|r| r.unbounded_normal_regime);
            let result = json!({
                "diagnostics": rows,
                "unbounded_normal_regime_present": flagged,
            });
            write_atomic(
                &output_path(command, "json")?,
                &json_with_metadata(&meta, result)?,
            )
        }
    }
}

/// Parses `args`, runs, and maps the outcome to an exit status:
/// 0 success, 1 validation error, 2 numerical failure.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{TOOL_NAME}: error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}
