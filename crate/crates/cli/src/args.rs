use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use elastic_match::elasticity::LameParams;
use elastic_match::matcher::MatchConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "elastic-match", version, about = "Elastic matching of planar shapes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deform the source onto the target and write overlays, logs and results.
    Match(RunArgs),
    /// Run the area-based matcher and the closest-point baseline side by side.
    Compare(RunArgs),
    /// Repeat the run recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the symmetric-difference area of two shapes.
    Symdiff {
        a: PathBuf,
        b: PathBuf,
        /// Write the symmetric-difference region as SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Write per-node normal derivatives of the area w.r.t. the nodes of A as CSV.
        #[arg(long)]
        gradient: Option<PathBuf>,
        /// Finite-difference step, default 1e-3 of the joint bounding-box diagonal.
        #[arg(long)]
        fd_step: Option<f64>,
    },
    /// Triangulate a shape and write the mesh as OFF and SVG.
    Mesh {
        shape: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Largest triangle area, default area/300.
        #[arg(long)]
        max_area: Option<f64>,
        #[arg(long, default_value_t = 25.0)]
        min_angle: f64,
    },
    /// Write the bundled source/target pairs as shape files.
    Shapes {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// Source shape (JSON rings or `x,y` CSV); one simple outer ring.
    #[arg(required_unless_present = "pair")]
    pub source: Option<PathBuf>,
    /// Target shape (JSON rings or `x,y` CSV).
    #[arg(required_unless_present = "pair")]
    pub target: Option<PathBuf>,
    /// Use a bundled pair instead of files: translated-star, ellipse-rectangle, articulated-star.
    #[arg(long, conflicts_with_all = ["source", "target"])]
    pub pair: Option<String>,
    /// Source mesh (OFF). Its boundary loop replaces the source outline.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
}

/// Matching flags. Weights and the difference step are in normalized units,
/// where the joint bounding-box diagonal is about one.
#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ConfigArgs {
    /// Weight of the squared area term [default: 1e4/(area(S)+area(T))²].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the localization term.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Keep the localization weight fixed instead of adapting it.
    #[arg(long)]
    pub fixed_beta: bool,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Stop once the symmetric difference falls below this fraction of area(S)+area(T).
    #[arg(long, default_value_t = 0.01)]
    pub stop_fraction: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub fd_step: f64,
    /// Bound on the conformal distortion of every triangle.
    #[arg(long)]
    pub distortion_bound: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Accepted and recorded; the algorithm has no randomness.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    pub fn to_config(&self) -> Result<MatchConfig, CliError> {
        let lame = LameParams::new(self.mu, self.lambda).map_err(|e| CliError::Invalid(e.to_string()))?;
        Ok(MatchConfig {
            alpha: self.alpha,
            beta: self.beta,
            adapt_beta: !self.fixed_beta,
            max_iters: self.max_iters,
            stop_fraction: self.stop_fraction,
            fd_step: self.fd_step,
            distortion_bound: self.distortion_bound,
            lame,
            ..MatchConfig::default()
        })
    }
}
