use std::path::PathBuf;

use elastic_match::elasticity::ElasticityError;
use elastic_match::geometry::GeometryError;
use elastic_match::matcher::MatchError;
use elastic_match::meshing::MeshError;
use elastic_match::symdiff::SymdiffError;
use thiserror::Error;

/// Input validation failed.
pub const EXIT_INVALID: i32 = 2;
/// Meshing could not reach its targets.
pub const EXIT_MESH: i32 = 3;
/// A numerical stage failed; whatever outputs existed were still written.
pub const EXIT_NUMERICAL: i32 = 4;
/// Anything else, e.g. an unwritable output directory.
pub const EXIT_OTHER: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Symdiff(#[from] SymdiffError),
    #[error("{0}")]
    Numerical(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Geometry(e) => geometry_code(e),
            CliError::Mesh(e) => mesh_code(e),
            CliError::Symdiff(e) => symdiff_code(e),
            CliError::Match(e) => match e {
                MatchError::InvalidInput(_) => EXIT_INVALID,
                MatchError::Mesh(e) => mesh_code(e),
                MatchError::Geometry(e) => geometry_code(e),
                MatchError::Symdiff(e) => symdiff_code(e),
                // Both come from the user's material parameters or mesh.
                MatchError::Elasticity(ElasticityError::InvalidParams(_) | ElasticityError::DegenerateTriangle { .. }) => {
                    EXIT_INVALID
                }
                MatchError::Elasticity(_) | MatchError::Conic(_) => EXIT_NUMERICAL,
            },
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => EXIT_OTHER,
        }
    }
}

fn geometry_code(e: &GeometryError) -> i32 {
    match e {
        GeometryError::ClipDegeneracy(_) => EXIT_NUMERICAL,
        _ => EXIT_INVALID,
    }
}

fn mesh_code(e: &MeshError) -> i32 {
    match e {
        MeshError::Failure { .. } => EXIT_MESH,
        MeshError::Io(_) => EXIT_OTHER,
        _ => EXIT_INVALID,
    }
}

fn symdiff_code(e: &SymdiffError) -> i32 {
    match e {
        SymdiffError::Geometry(g) => geometry_code(g),
        SymdiffError::InvalidStep(_) => EXIT_INVALID,
        SymdiffError::DimensionMismatch { .. } => EXIT_NUMERICAL,
    }
}
