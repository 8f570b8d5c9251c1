//! Command-line front end for `densridge`.
//!
//! Subcommands: `generate-circle`, `bandwidth`, `ridge`, `true-ridge`,
//! `evaluate` and `plot`. Inputs are CSV files with a header row; results are
//! CSV with 17 significant digits per number, plots are SVG 1.1.

pub mod error;
pub mod io;
pub mod plot;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use densridge::bandwidth::{emst_bandwidth, silverman_bandwidth};
use densridge::circle_oracle::{hausdorff, sample_circle, true_ridge_radius, CircleModel};
use densridge::ridge_search::{search_many, starting_grid, SearchConfig, Variant};
use densridge::PointCloud;

pub use error::{CliError, Result};
use io::Filter;

#[derive(Debug, Parser)]
#[command(name = "densridge", version, about = "Density ridge estimation on point clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample noisy points around a circle.
    GenerateCircle(GenerateArgs),
    /// Print a data-driven bandwidth.
    Bandwidth(BandwidthArgs),
    /// Run a ridge or mode search from a grid of starting points.
    Ridge(RidgeArgs),
    /// Print the ridge radius of the noisy-circle density.
    TrueRidge(TrueRidgeArgs),
    /// Hausdorff distance between converged ridge points and the true ridge.
    Evaluate(EvaluateArgs),
    /// Draw data, ridge points and intervals as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Circle radius.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Standard deviation of the Gaussian noise.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Number of points.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV with columns x_1,x_2.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct InputArgs {
    /// Input CSV with a header row.
    pub input: PathBuf,
    /// Columns used as coordinates (names or 1-based indices); default all.
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    /// Keep rows with lo <= col <= hi; repeatable.
    #[arg(long = "filter", value_name = "COL:LO:HI")]
    pub filters: Vec<Filter>,
}

#[derive(Debug, Args, Clone)]
#[group(required = true, multiple = false)]
pub struct HArgs {
    /// Fixed bandwidth.
    #[arg(long)]
    pub h: Option<f64>,
    /// Rule-of-thumb bandwidth with scale factor A0.
    #[arg(long, value_name = "A0")]
    pub silverman: Option<f64>,
    /// Bandwidth from the Euclidean minimum spanning tree length.
    #[arg(long)]
    pub emst: bool,
}

#[derive(Debug, Args)]
pub struct BandwidthArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub h: HArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StartSet {
    /// Lattice nodes near the data.
    Grid,
    /// The data points themselves.
    Data,
}

#[derive(Debug, Args)]
pub struct RidgeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// meanshift, scms, lcrs or slcrs.
    #[arg(long, default_value = "lcrs")]
    pub algorithm: Variant,
    #[command(flatten)]
    pub h: HArgs,
    /// Convergence tolerance; default 1e-4 h.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Level of the reported threshold interval (LCRS and sLCRS).
    #[arg(long, default_value_t = 0.9)]
    pub tau: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = StartSet::Grid)]
    pub starts: StartSet,
    /// Lattice spacing of the starting grid.
    #[arg(long, default_value_t = 0.5)]
    pub grid_spacing: f64,
    /// Drop grid nodes farther than this from every data point.
    #[arg(long, default_value_t = 0.5)]
    pub grid_max_dist: f64,
    /// Use a random subset of this many rows.
    #[arg(long)]
    pub subsample: Option<usize>,
    /// Seed for --subsample.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write every iterate to this CSV.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Results CSV, one row per start.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrueRidgeArgs {
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Ridge of the density smoothed by a Gaussian kernel of this bandwidth.
    #[arg(long, default_value_t = 0.0)]
    pub h: f64,
    /// Write the ridge as evenly spaced points to this CSV.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Number of ridge points to write.
    #[arg(long, default_value_t = 720)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Results CSV from `ridge`.
    pub results: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Compare against the ridge of the density smoothed at this bandwidth.
    #[arg(long, default_value_t = 0.0)]
    pub h: f64,
    /// Number of points on the true ridge.
    #[arg(long, default_value_t = 720)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Results CSV from `ridge`.
    #[arg(long)]
    pub results: PathBuf,
    /// Data CSV the search ran on.
    #[arg(long)]
    pub data: PathBuf,
    /// Two data columns to draw; default the first two.
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    /// Keep data rows with lo <= col <= hi; repeatable.
    #[arg(long = "filter", value_name = "COL:LO:HI")]
    pub filters: Vec<Filter>,
    /// Output SVG.
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Where the bandwidth comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HSource {
    Explicit(f64),
    Silverman(f64),
    Emst,
}

impl HSource {
    fn from_args(a: &HArgs) -> Result<Self> {
        match (a.h, a.silverman, a.emst) {
            (Some(h), None, false) => Ok(HSource::Explicit(h)),
            (None, Some(a0), false) => Ok(HSource::Silverman(a0)),
            (None, None, true) => Ok(HSource::Emst),
            _ => Err(CliError::Usage("give exactly one of --h, --silverman, --emst".into())),
        }
    }

    pub fn resolve(self, data: &PointCloud) -> Result<f64> {
        let h = match self {
            HSource::Explicit(h) => h,
            HSource::Silverman(a0) => silverman_bandwidth(data, a0)?,
            HSource::Emst => emst_bandwidth(data)?,
        };
        if !(h.is_finite() && h > 0.0) {
            return Err(CliError::Usage(format!("bandwidth {h} must be positive")));
        }
        Ok(h)
    }
}

/// Everything a `ridge` run depends on.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub input: PathBuf,
    pub columns: Vec<String>,
    pub filters: Vec<Filter>,
    pub variant: Variant,
    pub h: HSource,
    pub tol: Option<f64>,
    pub tau: f64,
    pub max_iter: usize,
    pub starts: StartSet,
    pub grid_spacing: f64,
    pub grid_max_dist: f64,
    pub subsample: Option<usize>,
    pub seed: u64,
    pub output: PathBuf,
    pub trace: Option<PathBuf>,
}

impl RunManifest {
    pub fn from_args(a: &RidgeArgs) -> Result<Self> {
        let m = RunManifest {
            input: a.input.input.clone(),
            columns: a.input.columns.clone(),
            filters: a.input.filters.clone(),
            variant: a.algorithm,
            h: HSource::from_args(&a.h)?,
            tol: a.tol,
            tau: a.tau,
            max_iter: a.max_iter,
            starts: a.starts,
            grid_spacing: a.grid_spacing,
            grid_max_dist: a.grid_max_dist,
            subsample: a.subsample,
            seed: a.seed,
            output: a.output.clone(),
            trace: a.trace.clone(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.grid_spacing) || !positive(self.grid_max_dist) {
            return Err(CliError::Usage("grid spacing and grid distance must be positive".into()));
        }
        if self.subsample == Some(0) {
            return Err(CliError::Usage("--subsample must be positive".into()));
        }
        Ok(())
    }
}

/// What a `ridge` run reports on standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub data_points: usize,
    pub starts: usize,
    pub converged: usize,
    pub h: f64,
    pub seconds: f64,
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "data points: {}, starts: {}, converged: {}, h = {}, wall time {:.3} s",
            self.data_points, self.starts, self.converged, self.h, self.seconds
        )
    }
}

fn subsample(data: PointCloud, k: usize, seed: u64) -> Result<PointCloud> {
    if k >= data.len() {
        return Ok(data);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, data.len(), k).into_vec();
    picked.sort_unstable();
    let coords: Vec<f64> = picked.iter().flat_map(|&i| data.point(i).to_vec()).collect();
    let out = PointCloud::new(data.dim(), coords)?;
    Ok(match data.labels() {
        Some(l) => out.with_labels(l.to_vec())?,
        None => out,
    })
}

/// Ingests, searches from every start and writes the results (and trace).
pub fn run(m: &RunManifest) -> Result<RunSummary> {
    let clock = Instant::now();
    m.validate()?;
    let mut data = io::ingest(&m.input, &m.columns, &m.filters)?;
    if let Some(k) = m.subsample {
        data = subsample(data, k, m.seed)?;
    }
    let h = m.h.resolve(&data)?;
    let starts = match m.starts {
        StartSet::Grid => starting_grid(&data, m.grid_spacing, m.grid_max_dist)?,
        StartSet::Data => data.iter().map(<[f64]>::to_vec).collect(),
    };
    let mut config = SearchConfig::new(m.variant, h)
        .with_tau(m.tau)
        .with_max_iter(m.max_iter)
        .with_trace(m.trace.is_some());
    if let Some(tol) = m.tol {
        config = config.with_tol(tol);
    }
    let results = search_many(&data, &starts, &config)?;
    io::write_results(&m.output, data.dim(), &results)?;
    if let Some(path) = &m.trace {
        io::write_trace(path, data.dim(), &results)?;
    }
    Ok(RunSummary {
        data_points: data.len(),
        starts: starts.len(),
        converged: results.iter().filter(|r| r.converged).count(),
        h,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

fn smoothed_model(r: f64, sigma: f64, h: f64) -> Result<CircleModel> {
    if !(h.is_finite() && h >= 0.0) {
        return Err(CliError::Usage(format!("smoothing bandwidth {h} must be non-negative")));
    }
    Ok(CircleModel::new(r, sigma.hypot(h))?)
}

/// `count` evenly spaced points on the circle of radius `radius`; the origin
/// alone when the radius is zero.
pub fn ridge_points(radius: f64, count: usize) -> Result<PointCloud> {
    if radius == 0.0 {
        return Ok(PointCloud::new(2, vec![0.0, 0.0])?);
    }
    if count == 0 {
        return Err(CliError::Usage("--points must be positive".into()));
    }
    let coords = (0..count)
        .flat_map(|k| {
            let t = std::f64::consts::TAU * k as f64 / count as f64;
            [radius * t.cos(), radius * t.sin()]
        })
        .collect();
    Ok(PointCloud::new(2, coords)?)
}

/// Scores of converged ridge points against the true ridge.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rows: usize,
    pub converged: usize,
    pub true_radius: f64,
    pub mean_radius: f64,
    pub hausdorff: f64,
}

pub fn evaluate(path: &Path, r: f64, sigma: f64, h: f64, points: usize) -> Result<Evaluation> {
    let (d, rows) = io::read_results(path)?;
    if d != 2 {
        return Err(CliError::Input(format!("{}: evaluation needs 2-D results, found {d}-D", path.display())));
    }
    let model = smoothed_model(r, sigma, h)?;
    let radius = true_ridge_radius(&model);
    let coords: Vec<f64> = rows.iter().filter(|r| r.converged).flat_map(|r| r.point.clone()).collect();
    if coords.is_empty() {
        return Err(CliError::Input(format!("{}: no converged ridge points", path.display())));
    }
    let est = PointCloud::new(2, coords)?;
    let truth = ridge_points(radius, points)?;
    let mean_radius = est.iter().map(|p| p[0].hypot(p[1])).sum::<f64>() / est.len() as f64;
    Ok(Evaluation {
        rows: rows.len(),
        converged: est.len(),
        true_radius: radius,
        mean_radius,
        hausdorff: hausdorff(&est, &truth)?,
    })
}

/// Reads the results and data files and writes the SVG plot.
pub fn plot_files(a: &PlotArgs) -> Result<()> {
    let (d, rows) = io::read_results(&a.results)?;
    if d != 2 {
        return Err(CliError::Input(format!("{}: plots need 2-D results, found {d}-D", a.results.display())));
    }
    let data = io::ingest(&a.data, &a.columns, &a.filters)?;
    let data = match (a.columns.is_empty(), data.dim()) {
        (_, 2) => data,
        (true, k) if k > 2 => {
            let coords = data.iter().flat_map(|p| [p[0], p[1]]).collect();
            let labels = data.labels().map(|l| l[..2].to_vec()).unwrap_or_default();
            PointCloud::new(2, coords)?.with_labels(labels)?
        }
        (_, k) => {
            return Err(CliError::Input(format!("{}: plots need two data columns, found {k}", a.data.display())))
        }
    };
    let points: Vec<[f64; 2]> = data.iter().map(|p| [p[0], p[1]]).collect();
    let labels = data.labels().unwrap_or_default();
    let label = |j: usize| labels.get(j).map(String::as_str).unwrap_or("");
    let svg = plot::render_svg(&points, &rows, [label(0), label(1)]);
    std::fs::write(&a.output, svg).map_err(|e| CliError::io(&a.output, e))
}

/// Executes one parsed command. Human-readable results go to standard
/// output, the run summary to standard error.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenerateCircle(a) => {
            let model = CircleModel::new(a.r, a.sigma)?;
            let cloud = sample_circle(&model, a.n, a.seed)?.with_labels(vec!["x".into(), "y".into()])?;
            io::write_cloud(&a.output, &cloud)?;
            eprintln!("wrote {} points to {}", cloud.len(), a.output.display());
        }
        Command::Bandwidth(a) => {
            let data = io::ingest(&a.input.input, &a.input.columns, &a.input.filters)?;
            let h = HSource::from_args(&a.h)?.resolve(&data)?;
            println!("{h}");
        }
        Command::Ridge(a) => {
            let summary = run(&RunManifest::from_args(a)?)?;
            eprintln!("{summary}");
        }
        Command::TrueRidge(a) => {
            let radius = true_ridge_radius(&smoothed_model(a.r, a.sigma, a.h)?);
            println!("{radius}");
            if let Some(path) = &a.output {
                let cloud = ridge_points(radius, a.points)?.with_labels(vec!["x".into(), "y".into()])?;
                io::write_cloud(path, &cloud)?;
            }
        }
        Command::Evaluate(a) => {
            let e = evaluate(&a.results, a.r, a.sigma, a.h, a.points)?;
            println!("rows={}", e.rows);
            println!("converged={}", e.converged);
            println!("true_radius={}", e.true_radius);
            println!("mean_radius={}", e.mean_radius);
            println!("hausdorff={}", e.hausdorff);
        }
        Command::Plot(a) => plot_files(a)?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_source_needs_exactly_one() {
        assert!(Cli::try_parse_from(["densridge", "bandwidth", "x.csv"]).is_err());
        assert!(Cli::try_parse_from(["densridge", "bandwidth", "x.csv", "--h", "1", "--emst"]).is_err());
        let cli = Cli::try_parse_from(["densridge", "bandwidth", "x.csv", "--silverman", "1.5"]).unwrap();
        let Command::Bandwidth(a) = cli.command else { panic!() };
        assert_eq!(HSource::from_args(&a.h).unwrap(), HSource::Silverman(1.5));
    }

    #[test]
    fn ridge_defaults() {
        let cli = Cli::try_parse_from(["densridge", "ridge", "in.csv", "--emst", "-o", "out.csv"]).unwrap();
        let Command::Ridge(a) = cli.command else { panic!() };
        let m = RunManifest::from_args(&a).unwrap();
        assert_eq!(m.variant, Variant::Lcrs);
        assert_eq!((m.grid_spacing, m.grid_max_dist, m.tau), (0.5, 0.5, 0.9));
        assert_eq!(m.h, HSource::Emst);
    }

    #[test]
    fn manifest_rejects_bad_grid() {
        let cli = Cli::try_parse_from([
            "densridge", "ridge", "in.csv", "--h", "0.3", "--grid-spacing", "0", "-o", "out.csv",
        ])
        .unwrap();
        let Command::Ridge(a) = cli.command else { panic!() };
        assert!(matches!(RunManifest::from_args(&a), Err(CliError::Usage(_))));
    }

    #[test]
    fn ridge_points_shape() {
        let c = ridge_points(2.0, 4).unwrap();
        assert_eq!(c.len(), 4);
        assert!((c.point(1)[1] - 2.0).abs() < 1e-15);
        assert_eq!(ridge_points(0.0, 4).unwrap().len(), 1);
    }
}
