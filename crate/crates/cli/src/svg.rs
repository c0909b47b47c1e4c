//! Minimal self-contained SVG line art: no scripts, no external references,
//! styles inline.

use std::fmt::Write as _;

use elastic_match::geometry::{BBox, Point, Polygon, PolygonSet};
use elastic_match::meshing::TriMesh;
use nalgebra::Vector2;

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 20.0;
const LEGEND: f64 = 60.0;

pub struct Svg {
    bb: BBox,
    /// Pixels per length unit.
    px: f64,
    height: f64,
    body: String,
    legend: Vec<String>,
}

impl Svg {
    /// A canvas showing `bb` with a little slack around it.
    pub fn new(bb: BBox) -> Self {
        let pad = 0.05 * bb.diagonal().max(f64::MIN_POSITIVE);
        let bb = BBox {
            min: Point::new(bb.min.x - pad, bb.min.y - pad),
            max: Point::new(bb.max.x + pad, bb.max.y + pad),
        };
        let (w, h) = (bb.max.x - bb.min.x, bb.max.y - bb.min.y);
        let px = (WIDTH - 2.0 * MARGIN) / w.max(h);
        Self {
            bb,
            px,
            height: h * px + 2.0 * MARGIN,
            body: String::new(),
            legend: Vec::new(),
        }
    }

    fn xy(&self, p: &Point) -> (f64, f64) {
        (MARGIN + (p.x - self.bb.min.x) * self.px, MARGIN + (self.bb.max.y - p.y) * self.px)
    }

    fn ring_path(&self, p: &Polygon, out: &mut String) {
        for (i, v) in p.vertices().iter().enumerate() {
            let (x, y) = self.xy(v);
            let _ = write!(out, "{}{x:.3},{y:.3} ", if i == 0 { 'M' } else { 'L' });
        }
        out.push_str("Z ");
    }

    pub fn set(&mut self, s: &PolygonSet, fill: &str, stroke: &str) {
        let mut d = String::new();
        for r in &s.rings {
            self.ring_path(&r.polygon, &mut d);
        }
        let _ = writeln!(
            self.body,
            r#"<path d="{}" style="fill:{fill};fill-opacity:0.35;fill-rule:evenodd;stroke:{stroke};stroke-width:1.5"/>"#,
            d.trim_end()
        );
    }

    pub fn polygon(&mut self, p: &Polygon, fill: &str, stroke: &str) {
        self.set(&PolygonSet::from_polygon(p.clone()), fill, stroke);
    }

    pub fn mesh(&mut self, m: &TriMesh, stroke: &str) {
        let mut d = String::new();
        for t in &m.triangles {
            self.ring_path(&Polygon::from_vertices_unchecked(t.iter().map(|&v| m.nodes[v]).collect()), &mut d);
        }
        let _ = writeln!(
            self.body,
            r#"<path d="{}" style="fill:none;stroke:{stroke};stroke-width:0.6"/>"#,
            d.trim_end()
        );
    }

    /// One arrow per node, drawn at `scale` length units per unit of the
    /// vector. The scale goes into the legend.
    pub fn arrows(&mut self, origins: &[Point], v: &[Vector2<f64>], scale: f64, color: &str, label: &str) {
        for (o, f) in origins.iter().zip(v) {
            if f.norm() == 0.0 {
                continue;
            }
            let (x0, y0) = self.xy(o);
            let (x1, y1) = self.xy(&(o + scale * f));
            let _ = writeln!(
                self.body,
                r#"<line x1="{x0:.3}" y1="{y0:.3}" x2="{x1:.3}" y2="{y1:.3}" style="stroke:{color};stroke-width:1.2" marker-end="url(#head)"/>"#
            );
        }
        self.legend.push(format!("{label}: arrow length = {scale:e} × magnitude"));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.legend.push(text.into());
    }

    pub fn finish(self) -> String {
        let total = self.height + LEGEND.max(16.0 * self.legend.len() as f64 + 8.0);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{total:.0}" viewBox="0 0 {WIDTH} {total:.0}">"#
        );
        s.push_str(
            r##"<defs><marker id="head" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 Z" style="fill:#1f4fbf"/></marker></defs>"##,
        );
        s.push('\n');
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{total:.0}" style="fill:white"/>"#);
        s.push_str(&self.body);
        for (i, line) in self.legend.iter().enumerate() {
            let y = self.height + 16.0 * (i as f64 + 1.0);
            let _ = writeln!(
                s,
                r#"<text x="{MARGIN}" y="{y:.0}" style="font-family:monospace;font-size:12px;fill:black">{}</text>"#,
                escape(line)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Length units per force unit so the longest arrow spans a tenth of the
/// picture diagonal. Zero when there is nothing to draw.
pub fn arrow_scale(v: &[Vector2<f64>], bb: &BBox) -> f64 {
    let max = v.iter().map(|f| f.norm()).fold(0.0, f64::max);
    if max > 0.0 {
        0.1 * bb.diagonal() / max
    } else {
        0.0
    }
}
