//! Command-line front end: shape and mesh ingestion, matching runs, and SVG
//! and CSV output.

pub mod args;
pub mod diag;
pub mod error;
pub mod run;
pub mod svg;

pub use args::{Cli, Command};
pub use error::CliError;

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Match(a) => run::cmd_match(&a),
        Command::Compare(a) => run::cmd_compare(&a),
        Command::Replay { manifest, out } => run::cmd_replay(&manifest, &out),
        Command::Symdiff {
            a,
            b,
            svg,
            gradient,
            fd_step,
        } => diag::cmd_symdiff(&a, &b, svg.as_deref(), gradient.as_deref(), fd_step),
        Command::Mesh {
            shape,
            out,
            max_area,
            min_angle,
        } => diag::cmd_mesh(&shape, &out, max_area, min_angle),
        Command::Shapes { out } => diag::cmd_shapes(&out),
    }
}
