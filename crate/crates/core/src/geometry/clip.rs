//! Boolean operations on polygon sets.
//!
//! Both inputs are snapped to a dyadic integer grid whose spacing is 2⁻³¹ of
//! the joint bounding-box diagonal (rounded up to a power of two). Every
//! predicate after snapping is exact in `i128`. Crossing edges are snap
//! rounded through hot pixels and touching edges are split until the edges
//! form a planar arrangement. Each arrangement edge is then classified by even–odd ray
//! casting on both of its sides, and edges separating inside from outside
//! form the result boundary.

use std::collections::{BTreeMap, HashMap};

use super::{BoolOp, GeometryError, Point, Polygon, PolygonSet, Ring, Role};

type IPoint = (i64, i64);

const GRID_BITS: i32 = 31;
const MAX_SPLIT_PASSES: usize = 16;

#[derive(Debug, Clone, Copy)]
struct Grid {
    quantum: f64,
    origin: IPoint,
}

impl Grid {
    fn new(a: &PolygonSet, b: &PolygonSet) -> Result<Option<Self>, GeometryError> {
        let bbox = match (a.bbox(), b.bbox()) {
            (Some(x), Some(y)) => x.union(&y),
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => return Ok(None),
        };
        let diag = bbox.diagonal();
        if !diag.is_finite() {
            return Err(GeometryError::InvalidShape("non-finite coordinates".into()));
        }
        if diag == 0.0 {
            return Ok(None);
        }
        let quantum = 2f64.powi(diag.log2().ceil() as i32 - GRID_BITS);
        let reach = bbox.min.x.abs().max(bbox.max.x.abs()).max(bbox.min.y.abs()).max(bbox.max.y.abs());
        if reach / quantum >= 2f64.powi(61) {
            return Err(GeometryError::ClipDegeneracy(
                "coordinates too far from the origin relative to the shape size".into(),
            ));
        }
        let origin = ((bbox.min.x / quantum).round() as i64, (bbox.min.y / quantum).round() as i64);
        Ok(Some(Self { quantum, origin }))
    }

    fn snap(&self, p: &Point) -> IPoint {
        (
            (p.x / self.quantum).round() as i64 - self.origin.0,
            (p.y / self.quantum).round() as i64 - self.origin.1,
        )
    }

    fn unsnap(&self, p: IPoint) -> Point {
        Point::new(
            (p.0 + self.origin.0) as f64 * self.quantum,
            (p.1 + self.origin.1) as f64 * self.quantum,
        )
    }
}

fn cross(o: IPoint, a: IPoint, b: IPoint) -> i128 {
    let (ax, ay) = ((a.0 - o.0) as i128, (a.1 - o.1) as i128);
    let (bx, by) = ((b.0 - o.0) as i128, (b.1 - o.1) as i128);
    ax * by - ay * bx
}

fn within_box(a: IPoint, b: IPoint, c: IPoint) -> bool {
    c.0 >= a.0.min(b.0) && c.0 <= a.0.max(b.0) && c.1 >= a.1.min(b.1) && c.1 <= a.1.max(b.1)
}

/// Round-to-nearest integer division.
fn div_round(n: i128, d: i128) -> i128 {
    let (n, d) = if d < 0 { (-n, -d) } else { (n, d) };
    (2 * n + d).div_euclid(2 * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Seg {
    a: IPoint,
    b: IPoint,
    owner: u8,
}

impl Seg {
    fn new(p: IPoint, q: IPoint, owner: u8) -> Self {
        if p <= q {
            Self { a: p, b: q, owner }
        } else {
            Self { a: q, b: p, owner }
        }
    }
}

fn collect_segments(set: &PolygonSet, grid: &Grid, owner: u8, out: &mut Vec<Seg>) {
    for ring in &set.rings {
        let mut pts: Vec<IPoint> = Vec::with_capacity(ring.polygon.len());
        for v in ring.polygon.vertices() {
            let s = grid.snap(v);
            if pts.last() != Some(&s) {
                pts.push(s);
            }
        }
        while pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        if pts.len() < 2 {
            continue;
        }
        for i in 0..pts.len() {
            let p = pts[i];
            let q = pts[(i + 1) % pts.len()];
            if p != q {
                out.push(Seg::new(p, q, owner));
            }
        }
    }
}

/// Crossings and touching points found in one sweep over the segments.
struct Events {
    /// Rounded proper-crossing points.
    crossings: Vec<IPoint>,
    /// Per segment: endpoints of other segments lying in its interior.
    touches: Vec<Vec<IPoint>>,
    any_touch: bool,
}

fn find_events(segs: &[Seg]) -> Events {
    let mut ev = Events {
        crossings: Vec::new(),
        touches: vec![Vec::new(); segs.len()],
        any_touch: false,
    };
    let mut order: Vec<usize> = (0..segs.len()).collect();
    order.sort_by_key(|&i| segs[i].a.0);
    let mut active: Vec<usize> = Vec::new();
    for &i in &order {
        let s = segs[i];
        active.retain(|&j| segs[j].b.0 >= s.a.0);
        let (sy0, sy1) = (s.a.1.min(s.b.1), s.a.1.max(s.b.1));
        for &j in &active {
            let t = segs[j];
            if t.a.1.max(t.b.1) < sy0 || t.a.1.min(t.b.1) > sy1 {
                continue;
            }
            pair_events(&s, &t, i, j, &mut ev);
        }
        active.push(i);
    }
    ev
}

fn pair_events(s: &Seg, t: &Seg, i: usize, j: usize, ev: &mut Events) {
    let o1 = cross(s.a, s.b, t.a).signum();
    let o2 = cross(s.a, s.b, t.b).signum();
    let o3 = cross(t.a, t.b, s.a).signum();
    let o4 = cross(t.a, t.b, s.b).signum();
    if o1 * o2 < 0 && o3 * o4 < 0 {
        let den = cross((0, 0), (s.b.0 - s.a.0, s.b.1 - s.a.1), (t.b.0 - t.a.0, t.b.1 - t.a.1));
        let num = cross((0, 0), (t.a.0 - s.a.0, t.a.1 - s.a.1), (t.b.0 - t.a.0, t.b.1 - t.a.1));
        let x = s.a.0 as i128 + div_round((s.b.0 - s.a.0) as i128 * num, den);
        let y = s.a.1 as i128 + div_round((s.b.1 - s.a.1) as i128 * num, den);
        ev.crossings.push((x as i64, y as i64));
        return;
    }
    let mut touch = |o: i128, seg: &Seg, p: IPoint, k: usize| {
        if o == 0 && p != seg.a && p != seg.b && within_box(seg.a, seg.b, p) {
            ev.touches[k].push(p);
            ev.any_touch = true;
        }
    };
    touch(o1, s, t.a, i);
    touch(o2, s, t.b, i);
    touch(o3, t, s.a, j);
    touch(o4, t, s.b, j);
}

/// Replaces `s` by the chain through `points` ordered along `s`.
fn push_chain(s: &Seg, mut points: Vec<IPoint>, out: &mut Vec<Seg>) {
    let d = ((s.b.0 - s.a.0) as i128, (s.b.1 - s.a.1) as i128);
    points.sort_by_key(|p| (p.0 - s.a.0) as i128 * d.0 + (p.1 - s.a.1) as i128 * d.1);
    points.dedup();
    let mut prev = s.a;
    for p in points.into_iter().chain(std::iter::once(s.b)) {
        if p != prev {
            out.push(Seg::new(prev, p, s.owner));
            prev = p;
        }
    }
}

/// Whether segment `s` meets the closed unit pixel centred at `c`.
fn hits_pixel(s: &Seg, c: IPoint) -> bool {
    let (x0, x1) = (2 * s.a.0.min(s.b.0) as i128, 2 * s.a.0.max(s.b.0) as i128);
    let (y0, y1) = (2 * s.a.1.min(s.b.1) as i128, 2 * s.a.1.max(s.b.1) as i128);
    let (cx, cy) = (2 * c.0 as i128, 2 * c.1 as i128);
    if x1 < cx - 1 || x0 > cx + 1 || y1 < cy - 1 || y0 > cy + 1 {
        return false;
    }
    let (ax, ay) = (2 * s.a.0 as i128, 2 * s.a.1 as i128);
    let (dx, dy) = (2 * (s.b.0 - s.a.0) as i128, 2 * (s.b.1 - s.a.1) as i128);
    let side = |px: i128, py: i128| (dx * (py - ay) - dy * (px - ax)).signum();
    let corners = [
        side(cx - 1, cy - 1),
        side(cx + 1, cy - 1),
        side(cx + 1, cy + 1),
        side(cx - 1, cy + 1),
    ];
    !(corners.iter().all(|&c| c > 0) || corners.iter().all(|&c| c < 0))
}

/// Snap rounding: every segment is rerouted through the centre of each hot
/// pixel it passes through. Hot pixels are all segment endpoints plus the
/// rounded crossing points, so rounded segments meet only at pixel centres.
fn snap_round(segs: &[Seg], crossings: &[IPoint]) -> Vec<Seg> {
    let mut hot: Vec<IPoint> = segs.iter().flat_map(|s| [s.a, s.b]).chain(crossings.iter().copied()).collect();
    hot.sort_unstable();
    hot.dedup();
    let mut out = Vec::with_capacity(segs.len() + 2 * crossings.len());
    for s in segs {
        let lo = hot.partition_point(|p| p.0 < s.a.0 - 1);
        let hi = hot.partition_point(|p| p.0 <= s.b.0 + 1);
        let through: Vec<IPoint> = hot[lo..hi]
            .iter()
            .copied()
            .filter(|&c| c != s.a && c != s.b && hits_pixel(s, c))
            .collect();
        push_chain(s, through, &mut out);
    }
    out
}

/// Unique arrangement edges with one parity bit per input.
fn arrangement(a: &PolygonSet, b: &PolygonSet, grid: &Grid) -> Result<Vec<(IPoint, IPoint, u8)>, GeometryError> {
    let mut segs = Vec::new();
    collect_segments(a, grid, 0, &mut segs);
    collect_segments(b, grid, 1, &mut segs);
    let mut passes = 0;
    loop {
        let ev = find_events(&segs);
        if ev.crossings.is_empty() && !ev.any_touch {
            break;
        }
        passes += 1;
        if passes > MAX_SPLIT_PASSES {
            return Err(GeometryError::ClipDegeneracy(
                "snap rounding did not converge on the grid".into(),
            ));
        }
        segs = if !ev.crossings.is_empty() {
            snap_round(&segs, &ev.crossings)
        } else {
            // Touching points already lie on the segments: splitting there
            // changes no geometry.
            let mut out = Vec::with_capacity(segs.len() * 2);
            for (s, t) in segs.iter().zip(ev.touches) {
                push_chain(s, t, &mut out);
            }
            out
        };
    }
    let mut bits: BTreeMap<(IPoint, IPoint), u8> = BTreeMap::new();
    for s in segs {
        *bits.entry((s.a, s.b)).or_insert(0) ^= 1 << s.owner;
    }
    Ok(bits.into_iter().filter(|&(_, m)| m != 0).map(|((p, q), m)| (p, q, m)).collect())
}

/// Parity bits of the region just beyond the midpoint of each query edge in
/// the +x direction, found by sweeping a horizontal line upwards. With
/// `swap`, the axes are exchanged, so the ray points in +y.
fn ray_parities(edges: &[(IPoint, IPoint, u8)], queries: &[usize], swap: bool) -> Result<Vec<(usize, u8)>, GeometryError> {
    let tr = |p: IPoint| if swap { (p.1, p.0) } else { p };
    struct Span {
        lo: IPoint,
        hi: IPoint,
        bits: u8,
        edge: usize,
    }
    let mut spans: Vec<Span> = edges
        .iter()
        .enumerate()
        .filter_map(|(k, &(a, b, m))| {
            let (a, b) = (tr(a), tr(b));
            match a.1.cmp(&b.1) {
                std::cmp::Ordering::Less => Some(Span { lo: a, hi: b, bits: m, edge: k }),
                std::cmp::Ordering::Greater => Some(Span { lo: b, hi: a, bits: m, edge: k }),
                std::cmp::Ordering::Equal => None,
            }
        })
        .collect();
    spans.sort_by_key(|s| s.lo.1);
    // Doubled midpoints keep everything integral.
    let mut qs: Vec<(i128, i128, usize)> = queries
        .iter()
        .map(|&k| {
            let (a, b) = (tr(edges[k].0), tr(edges[k].1));
            ((a.0 + b.0) as i128, (a.1 + b.1) as i128, k)
        })
        .collect();
    qs.sort_by_key(|q| q.1);
    let mut active: Vec<usize> = Vec::new();
    let mut next = 0;
    let mut out = Vec::with_capacity(qs.len());
    for (mx, my, k) in qs {
        while next < spans.len() && 2 * spans[next].lo.1 as i128 <= my {
            active.push(next);
            next += 1;
        }
        active.retain(|&s| 2 * spans[s].hi.1 as i128 > my);
        let mut parity = 0u8;
        for &s in &active {
            let sp = &spans[s];
            if sp.edge == k {
                continue;
            }
            // Sign of x_span(my) − mx, scaled by (hi.y − lo.y) > 0.
            let dy = (sp.hi.1 - sp.lo.1) as i128;
            let side = (2 * sp.lo.0 as i128 - mx) * dy + (sp.hi.0 - sp.lo.0) as i128 * (my - 2 * sp.lo.1 as i128);
            if side == 0 {
                return Err(GeometryError::ClipDegeneracy("ray passes through an edge midpoint".into()));
            }
            if side > 0 {
                parity ^= sp.bits;
            }
        }
        out.push((k, parity));
    }
    Ok(out)
}

/// Boundary edges of the result, oriented with the inside on their left.
fn result_edges(a: &PolygonSet, b: &PolygonSet, op: BoolOp, grid: &Grid) -> Result<Vec<(IPoint, IPoint)>, GeometryError> {
    let edges = arrangement(a, b, grid)?;
    let inside = |bits: u8| op.apply(bits & 1 != 0, bits & 2 != 0);
    // `first`: parity right of non-horizontal edges, above horizontal ones.
    let (flat, steep): (Vec<usize>, Vec<usize>) = (0..edges.len()).partition(|&k| edges[k].0 .1 == edges[k].1 .1);
    let mut first_side = vec![0u8; edges.len()];
    for (k, bits) in ray_parities(&edges, &steep, false)?.into_iter().chain(ray_parities(&edges, &flat, true)?) {
        first_side[k] = bits;
    }
    let mut out = Vec::new();
    for (k, &(p, q, m)) in edges.iter().enumerate() {
        let first = first_side[k];
        let second = first ^ m;
        let (in_first, in_second) = (inside(first), inside(second));
        if in_first == in_second {
            continue;
        }
        if p.1 != q.1 {
            // `first` is the +x side; upward edges have +x on their right.
            let (lo, hi) = if p.1 < q.1 { (p, q) } else { (q, p) };
            out.push(if in_second { (lo, hi) } else { (hi, lo) });
        } else {
            // `first` is the side above; +x edges have it on their left.
            let (lo, hi) = if p.0 < q.0 { (p, q) } else { (q, p) };
            out.push(if in_first { (lo, hi) } else { (hi, lo) });
        }
    }
    Ok(out)
}

fn edges_area(edges: &[(IPoint, IPoint)], quantum: f64) -> f64 {
    let twice: i128 = edges.iter().map(|&(p, q)| cross((0, 0), p, q)).sum();
    0.5 * twice as f64 * quantum * quantum
}

/// Half-plane index and comparison of counter-clockwise angles from `r`.
fn angle_key(r: IPoint, w: IPoint) -> (u8, IPoint) {
    let c = cross((0, 0), r, w);
    let d = r.0 as i128 * w.0 as i128 + r.1 as i128 * w.1 as i128;
    let half = if c > 0 || (c == 0 && d < 0) { 0 } else { 1 };
    (half, w)
}

fn ccw_greater(r: IPoint, w1: IPoint, w2: IPoint) -> bool {
    let (h1, _) = angle_key(r, w1);
    let (h2, _) = angle_key(r, w2);
    if h1 != h2 {
        return h2 > h1;
    }
    cross((0, 0), w1, w2) > 0
}

fn link_rings(edges: &[(IPoint, IPoint)]) -> Result<Vec<Vec<IPoint>>, GeometryError> {
    let mut outgoing: HashMap<IPoint, Vec<usize>> = HashMap::new();
    for (k, e) in edges.iter().enumerate() {
        outgoing.entry(e.0).or_default().push(k);
    }
    let mut used = vec![false; edges.len()];
    let mut rings = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut ring = Vec::new();
        let mut cur = start;
        loop {
            used[cur] = true;
            let (from, v) = edges[cur];
            ring.push(from);
            let r = (from.0 - v.0, from.1 - v.1);
            let cands = outgoing
                .get(&v)
                .ok_or_else(|| GeometryError::ClipDegeneracy("open boundary chain".into()))?;
            let mut best = cands[0];
            for &c in &cands[1..] {
                let wb = (edges[best].1 .0 - v.0, edges[best].1 .1 - v.1);
                let wc = (edges[c].1 .0 - v.0, edges[c].1 .1 - v.1);
                if ccw_greater(r, wb, wc) {
                    best = c;
                }
            }
            if best == start {
                break;
            }
            if used[best] {
                return Err(GeometryError::ClipDegeneracy("boundary edges do not form cycles".into()));
            }
            cur = best;
        }
        rings.extend(split_at_repeats(ring));
    }
    Ok(rings)
}

/// Splits a closed vertex sequence into simple loops at repeated vertices.
fn split_at_repeats(ring: Vec<IPoint>) -> Vec<Vec<IPoint>> {
    let mut out = Vec::new();
    let mut stack: Vec<IPoint> = Vec::with_capacity(ring.len());
    let mut pos: HashMap<IPoint, usize> = HashMap::new();
    for v in ring {
        if let Some(&k) = pos.get(&v) {
            let lp: Vec<IPoint> = stack.drain(k..).collect();
            for p in &lp {
                pos.remove(p);
            }
            out.push(lp);
        }
        pos.insert(v, stack.len());
        stack.push(v);
    }
    out.push(stack);
    out.into_iter().map(remove_collinear).filter(|r| r.len() >= 3).collect()
}

fn remove_collinear(mut ring: Vec<IPoint>) -> Vec<IPoint> {
    loop {
        let n = ring.len();
        if n < 3 {
            return ring;
        }
        let keep: Vec<bool> = (0..n)
            .map(|i| cross(ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]) != 0)
            .collect();
        if keep.iter().all(|&k| k) {
            return ring;
        }
        // Remove one vertex at a time so the neighbours are re-examined.
        let drop = keep.iter().position(|&k| !k).unwrap();
        ring.remove(drop);
    }
}

fn twice_area(ring: &[IPoint]) -> i128 {
    let n = ring.len();
    (0..n).map(|i| cross((0, 0), ring[i], ring[(i + 1) % n])).sum()
}

/// Exact even–odd test of the doubled point `(px, py)` against `ring`.
fn contains_doubled(ring: &[IPoint], px: i128, py: i128) -> Result<bool, GeometryError> {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if a.1 == b.1 {
            continue;
        }
        let (lo, hi) = if a.1 < b.1 { (a, b) } else { (b, a) };
        if !(2 * lo.1 as i128 <= py && py < 2 * hi.1 as i128) {
            continue;
        }
        let dy = (hi.1 - lo.1) as i128;
        let s = (2 * lo.0 as i128 - px) * dy + (hi.0 - lo.0) as i128 * (py - 2 * lo.1 as i128);
        if s == 0 {
            return Err(GeometryError::ClipDegeneracy("hole probe on a ring boundary".into()));
        }
        if s > 0 {
            inside = !inside;
        }
    }
    Ok(inside)
}

fn assemble(rings: Vec<Vec<IPoint>>, grid: &Grid) -> Result<PolygonSet, GeometryError> {
    let mut outers: Vec<(Vec<IPoint>, i128)> = Vec::new();
    let mut holes: Vec<Vec<IPoint>> = Vec::new();
    for r in rings {
        let a = twice_area(&r);
        if a > 0 {
            outers.push((r, a));
        } else if a < 0 {
            holes.push(r);
        }
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); outers.len()];
    for (h, hole) in holes.iter().enumerate() {
        let (p, q) = (hole[0], hole[1]);
        let (px, py) = ((p.0 + q.0) as i128, (p.1 + q.1) as i128);
        let mut owner: Option<usize> = None;
        for (k, (outer, area)) in outers.iter().enumerate() {
            if contains_doubled(outer, px, py)? && owner.map_or(true, |o| *area < outers[o].1) {
                owner = Some(k);
            }
        }
        let k = owner.ok_or_else(|| GeometryError::ClipDegeneracy("hole outside every outer ring".into()))?;
        children[k].push(h);
    }
    let to_polygon = |r: &[IPoint]| Polygon {
        vertices: r.iter().map(|&p| grid.unsnap(p)).collect(),
    };
    let mut out = PolygonSet::empty();
    for (k, (outer, _)) in outers.iter().enumerate() {
        out.rings.push(Ring {
            polygon: to_polygon(outer),
            role: Role::Outer,
        });
        for &h in &children[k] {
            out.rings.push(Ring {
                polygon: to_polygon(&holes[h]),
                role: Role::Hole,
            });
        }
    }
    Ok(out)
}

/// Boolean combination of two polygon sets under the even–odd fill rule.
/// Result rings are canonical: outer rings counter-clockwise, holes
/// clockwise, each hole listed right after its outer ring.
pub fn clip(subject: &PolygonSet, clip: &PolygonSet, op: BoolOp) -> Result<PolygonSet, GeometryError> {
    let Some(grid) = Grid::new(subject, clip)? else {
        return Ok(PolygonSet::empty());
    };
    let edges = result_edges(subject, clip, op, &grid)?;
    assemble(link_rings(&edges)?, &grid)
}

/// Area of the symmetric difference, μ(A △ B).
///
/// Same value as `set_area(clip(a, b, SymmetricDifference))`, but the area
/// is summed directly over the oriented boundary edges without assembling
/// rings.
pub fn symdiff_area(a: &PolygonSet, b: &PolygonSet) -> Result<f64, GeometryError> {
    let Some(grid) = Grid::new(a, b)? else {
        return Ok(0.0);
    };
    let edges = result_edges(a, b, BoolOp::SymmetricDifference, &grid)?;
    Ok(edges_area(&edges, grid.quantum).max(0.0))
}
