//! `symdiff`, `mesh` and `shapes`.

use std::fs;
use std::path::Path;

use elastic_match::geometry::{clip, symdiff_area, write_shape, BoolOp, PolygonSet};
use elastic_match::meshing::{triangulate, MeshParams};
use elastic_match::shapes;
use elastic_match::symdiff::{default_step, gradient, DeformedBoundary};
use serde::Serialize;

use crate::error::CliError;
use crate::run::{read_source, read_target, single_ring};
use crate::svg::Svg;

#[derive(Serialize)]
struct GradientRow {
    node: usize,
    x: f64,
    y: f64,
    normal_x: f64,
    normal_y: f64,
    /// Derivative of the area along the outward normal.
    d: f64,
}

pub fn cmd_symdiff(
    a_path: &Path,
    b_path: &Path,
    svg: Option<&Path>,
    grad: Option<&Path>,
    fd_step: Option<f64>,
) -> Result<(), CliError> {
    let a = read_target(a_path)?;
    let b = read_target(b_path)?;
    let area = symdiff_area(&a, &b)?;
    let total = a.area() + b.area();
    println!("area {area}");
    println!("fraction {}", if total > 0.0 { area / total } else { 0.0 });
    if let Some(path) = svg {
        let region = clip(&a, &b, BoolOp::SymmetricDifference)?;
        let bb = match (a.bbox(), b.bbox()) {
            (Some(x), Some(y)) => x.union(&y),
            _ => return Err(CliError::Invalid("shapes must be nonempty".into())),
        };
        let mut pic = Svg::new(bb);
        pic.set(&region, "#d04040", "none");
        pic.set(&a, "none", "#b06000");
        pic.set(&b, "none", "#444444");
        pic.note(format!("symmetric difference {area}"));
        fs::write(path, pic.finish()).map_err(CliError::io(path))?;
    }
    if let Some(path) = grad {
        let ring = single_ring(&a).map_err(|m| CliError::Invalid(format!("{}: {m}", a_path.display())))?;
        let db = DeformedBoundary::undeformed(ring);
        let h = fd_step.unwrap_or_else(|| default_step(&db, &b));
        let g = gradient(&db, &b, h)?;
        let mut w = csv::Writer::from_path(path)?;
        for (i, (p, n)) in db.ring().vertices().iter().zip(&g.normals).enumerate() {
            w.serialize(GradientRow {
                node: i,
                x: p.x,
                y: p.y,
                normal_x: n.x,
                normal_y: n.y,
                d: g.d[i],
            })?;
        }
        w.flush().map_err(CliError::io(path))?;
    }
    Ok(())
}

pub fn cmd_mesh(shape: &Path, out: &Path, max_area: Option<f64>, min_angle: f64) -> Result<(), CliError> {
    let p = read_source(shape)?;
    let mut params = MeshParams::for_polygon(&p);
    params.min_angle_deg = min_angle;
    if let Some(a) = max_area {
        params.max_triangle_area = a;
    }
    let mesh = triangulate(&p, &params)?;
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    mesh.write_off(&out.join("mesh.off"))?;
    let mut pic = Svg::new(mesh.bbox().expect("nonempty mesh"));
    pic.polygon(&mesh.boundary_polygon(), "#e0a030", "#b06000");
    pic.mesh(&mesh, "#444444");
    pic.note(format!(
        "{} nodes, {} on the boundary, {} triangles, min angle {:.2}°",
        mesh.num_nodes(),
        mesh.num_boundary(),
        mesh.triangles.len(),
        mesh.min_angle_deg()
    ));
    let path = out.join("mesh.svg");
    fs::write(&path, pic.finish()).map_err(CliError::io(&path))?;
    println!("N {}", mesh.num_nodes());
    println!("K {}", mesh.num_boundary());
    println!("triangles {}", mesh.triangles.len());
    println!("area {}", mesh.area());
    Ok(())
}

pub fn cmd_shapes(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    for name in shapes::PAIRS {
        let (s, t) = shapes::pair(name).expect("bundled pair");
        for (role, p) in [("source", s), ("target", t)] {
            let path = out.join(format!("{name}.{role}.json"));
            write_shape(&path, &PolygonSet::from_polygon(p)).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
            println!("{}", path.display());
        }
    }
    Ok(())
}
