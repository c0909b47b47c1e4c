//! Cone algebra for products of nonnegative orthants and second-order cones:
//! Jordan products, Nesterov–Todd scalings and step lengths.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Block {
    NonNeg { start: usize, dim: usize },
    Soc { start: usize, dim: usize },
}

impl Block {
    fn range(&self) -> std::ops::Range<usize> {
        match *self {
            Block::NonNeg { start, dim } | Block::Soc { start, dim } => start..start + dim,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Cones {
    pub blocks: Vec<Block>,
}

/// Length of the tail `‖v[1..]‖₂`.
fn tail_norm(v: &[f64]) -> f64 {
    v[1..].iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `v0² − ‖v1‖²`, factored to limit cancellation near the boundary.
fn jnorm_sq(v: &[f64]) -> f64 {
    let t = tail_norm(v);
    (v[0] - t) * (v[0] + t)
}

impl Cones {
    pub fn dim(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.range().end)
    }

    /// Barrier degree: one per orthant coordinate, one per second-order cone.
    pub fn degree(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match *b {
                Block::NonNeg { dim, .. } => dim,
                Block::Soc { .. } => 1,
            })
            .sum()
    }

    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim()];
        for b in &self.blocks {
            match *b {
                Block::NonNeg { start, dim } => e[start..start + dim].fill(1.0),
                Block::Soc { start, .. } => e[start] = 1.0,
            }
        }
        e
    }

    /// Smallest `a` with `v + a·e` in the cone (negative when `v` is interior).
    pub fn min_shift(&self, v: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for b in &self.blocks {
            let r = b.range();
            let a = match b {
                Block::NonNeg { .. } => v[r].iter().map(|x| -x).fold(f64::NEG_INFINITY, f64::max),
                Block::Soc { .. } => {
                    let s = &v[r];
                    tail_norm(s) - s[0]
                }
            };
            worst = worst.max(a);
        }
        worst
    }

    /// Whether `v` lies strictly inside every block.
    pub fn is_interior(&self, v: &[f64]) -> bool {
        self.blocks.iter().all(|b| {
            let r = b.range();
            match b {
                Block::NonNeg { .. } => v[r].iter().all(|&x| x > 0.0),
                Block::Soc { .. } => v[r.start] > 0.0 && jnorm_sq(&v[r]) > 0.0,
            }
        })
    }

    /// Maximal `α ≥ 0` such that `v + α dv` stays in the cone (`v` interior).
    pub fn max_step(&self, v: &[f64], dv: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for b in &self.blocks {
            let r = b.range();
            match b {
                Block::NonNeg { .. } => {
                    for (x, d) in v[r.clone()].iter().zip(&dv[r]) {
                        if *d < 0.0 {
                            alpha = alpha.min(-x / d);
                        }
                    }
                }
                Block::Soc { .. } => alpha = alpha.min(soc_max_step(&v[r.clone()], &dv[r])),
            }
        }
        alpha
    }

    /// Jordan product `u ∘ v`.
    pub fn product(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        for b in &self.blocks {
            let r = b.range();
            match b {
                Block::NonNeg { .. } => {
                    for i in r {
                        out[i] = u[i] * v[i];
                    }
                }
                Block::Soc { start, .. } => {
                    let s = *start;
                    let dot: f64 = u[r.clone()].iter().zip(&v[r.clone()]).map(|(a, b)| a * b).sum();
                    for i in s + 1..r.end {
                        out[i] = u[s] * v[i] + v[s] * u[i];
                    }
                    out[s] = dot;
                }
            }
        }
    }

    /// Jordan division: the `x` with `λ ∘ x = r`.
    pub fn divide(&self, lambda: &[f64], rhs: &[f64], out: &mut [f64]) {
        for b in &self.blocks {
            let r = b.range();
            match b {
                Block::NonNeg { .. } => {
                    for i in r {
                        out[i] = rhs[i] / lambda[i];
                    }
                }
                Block::Soc { start, .. } => {
                    let s = *start;
                    let l = &lambda[r.clone()];
                    let det = jnorm_sq(l);
                    let l1r1: f64 = l[1..].iter().zip(&rhs[s + 1..r.end]).map(|(a, b)| a * b).sum();
                    let x0 = (l[0] * rhs[s] - l1r1) / det;
                    for i in s + 1..r.end {
                        out[i] = (rhs[i] - x0 * lambda[i]) / l[0];
                    }
                    out[s] = x0;
                }
            }
        }
    }
}

/// Largest `α` with `v + α d ∈ Q` for `v` in the interior of `Q`.
fn soc_max_step(v: &[f64], d: &[f64]) -> f64 {
    let d_tail: f64 = d[1..].iter().map(|x| x * x).sum();
    let a = d[0] * d[0] - d_tail;
    let b = 2.0 * (v[0] * d[0] - v[1..].iter().zip(&d[1..]).map(|(x, y)| x * y).sum::<f64>());
    let c = jnorm_sq(v).max(0.0);
    if d[0] >= d_tail.sqrt() {
        // The direction itself is in the cone.
        return f64::INFINITY;
    }
    // f(α) = aα² + bα + c; f(0) = c ≥ 0. Smallest positive root.
    let mut best = f64::INFINITY;
    if a.abs() <= 1e-300 {
        if b < 0.0 {
            best = -c / b;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (b + b.signum() * sq);
            for root in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
                if root >= 0.0 && root < best {
                    best = root;
                }
            }
        }
    }
    // The first coordinate must stay nonnegative as well.
    if d[0] < 0.0 {
        best = best.min(-v[0] / d[0]);
    }
    best
}

/// Per-block Nesterov–Todd scaling `W` with `W z = W⁻¹ s = λ`.
#[derive(Debug, Clone)]
pub(crate) enum BlockScaling {
    NonNeg { d: Vec<f64> },
    Soc { eta: f64, w0: f64, w1: Vec<f64> },
}

#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    blocks: Vec<(Block, BlockScaling)>,
}

impl Scaling {
    /// Returns the scaling and `λ`, or `None` if `s` or `z` left the interior.
    pub fn compute(cones: &Cones, s: &[f64], z: &[f64]) -> Option<(Scaling, Vec<f64>)> {
        let mut blocks = Vec::with_capacity(cones.blocks.len());
        let mut lambda = vec![0.0; s.len()];
        for b in &cones.blocks {
            let r = b.range();
            match b {
                Block::NonNeg { .. } => {
                    let mut d = Vec::with_capacity(r.len());
                    for i in r.clone() {
                        if !(s[i] > 0.0 && z[i] > 0.0) {
                            return None;
                        }
                        d.push((s[i] / z[i]).sqrt());
                        lambda[i] = (s[i] * z[i]).sqrt();
                    }
                    blocks.push((*b, BlockScaling::NonNeg { d }));
                }
                Block::Soc { .. } => {
                    let sb = &s[r.clone()];
                    let zb = &z[r.clone()];
                    let sn = jnorm_sq(sb);
                    let zn = jnorm_sq(zb);
                    if !(sn > 0.0 && zn > 0.0 && sb[0] > 0.0 && zb[0] > 0.0) {
                        return None;
                    }
                    let (sn, zn) = (sn.sqrt(), zn.sqrt());
                    let sbar: Vec<f64> = sb.iter().map(|x| x / sn).collect();
                    let zbar: Vec<f64> = zb.iter().map(|x| x / zn).collect();
                    let dot: f64 = sbar.iter().zip(&zbar).map(|(a, b)| a * b).sum();
                    let gamma = ((1.0 + dot) / 2.0).sqrt();
                    let w0 = (sbar[0] + zbar[0]) / (2.0 * gamma);
                    let w1: Vec<f64> = sbar[1..]
                        .iter()
                        .zip(&zbar[1..])
                        .map(|(a, b)| (a - b) / (2.0 * gamma))
                        .collect();
                    let eta = (sn / zn).sqrt();
                    let sc = BlockScaling::Soc { eta, w0, w1 };
                    let mut l = vec![0.0; r.len()];
                    apply_soc(&sc, zb, &mut l, false);
                    lambda[r].copy_from_slice(&l);
                    blocks.push((*b, sc));
                }
            }
        }
        Some((Scaling { blocks }, lambda))
    }

    /// `out = W v` (or `W⁻¹ v` when `inverse`).
    pub fn apply(&self, v: &[f64], out: &mut [f64], inverse: bool) {
        for (b, sc) in &self.blocks {
            let r = b.range();
            match sc {
                BlockScaling::NonNeg { d } => {
                    for (k, i) in r.enumerate() {
                        out[i] = if inverse { v[i] / d[k] } else { v[i] * d[k] };
                    }
                }
                BlockScaling::Soc { .. } => apply_soc(sc, &v[r.clone()], &mut out[r], inverse),
            }
        }
    }

    /// Applies `W⁻¹` to every column of a column-major `m × n` block in place.
    pub fn apply_inverse_columns(&self, data: &mut [f64], m: usize) {
        let mut tmp = vec![0.0; m];
        for col in data.chunks_mut(m) {
            self.apply(col, &mut tmp, true);
            col.copy_from_slice(&tmp);
        }
    }
}

fn apply_soc(sc: &BlockScaling, v: &[f64], out: &mut [f64], inverse: bool) {
    let BlockScaling::Soc { eta, w0, w1 } = sc else {
        unreachable!()
    };
    // W̄ = [[w0, w1ᵀ], [w1, I + w1 w1ᵀ/(1 + w0)]], W̄⁻¹ = J W̄ J.
    let sign = if inverse { -1.0 } else { 1.0 };
    let scale = if inverse { 1.0 / eta } else { *eta };
    let w1v1: f64 = w1.iter().zip(&v[1..]).map(|(a, b)| a * b).sum();
    out[0] = scale * (w0 * v[0] + sign * w1v1);
    let c = sign * v[0] + w1v1 / (1.0 + w0);
    for k in 0..w1.len() {
        out[k + 1] = scale * (v[k + 1] + c * w1[k]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soc3() -> Cones {
        Cones {
            blocks: vec![Block::Soc { start: 0, dim: 3 }],
        }
    }

    #[test]
    fn nt_scaling_maps_s_and_z_to_lambda() {
        let cones = Cones {
            blocks: vec![
                Block::NonNeg { start: 0, dim: 2 },
                Block::Soc { start: 2, dim: 3 },
            ],
        };
        let s = [1.0, 2.0, 3.0, 1.0, -1.5];
        let z = [0.5, 4.0, 2.0, -0.3, 0.7];
        let (w, lambda) = Scaling::compute(&cones, &s, &z).unwrap();
        let mut wz = [0.0; 5];
        let mut winv_s = [0.0; 5];
        w.apply(&z, &mut wz, false);
        w.apply(&s, &mut winv_s, true);
        for i in 0..5 {
            assert!((wz[i] - lambda[i]).abs() < 1e-12, "{wz:?} {lambda:?}");
            assert!((winv_s[i] - lambda[i]).abs() < 1e-12, "{winv_s:?} {lambda:?}");
        }
        // W W⁻¹ = I
        let v = [0.3, -0.2, 1.0, 0.4, 0.1];
        let mut a = [0.0; 5];
        let mut b = [0.0; 5];
        w.apply(&v, &mut a, true);
        w.apply(&a, &mut b, false);
        for i in 0..5 {
            assert!((b[i] - v[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn division_inverts_product() {
        let cones = soc3();
        let l = [2.0, 0.5, -0.7];
        let x = [0.1, 0.9, -0.4];
        let mut r = [0.0; 3];
        cones.product(&l, &x, &mut r);
        let mut back = [0.0; 3];
        cones.divide(&l, &r, &mut back);
        for i in 0..3 {
            assert!((back[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn step_to_boundary() {
        let cones = soc3();
        // From (1,0,0) moving along (0,1,0) exits at α = 1.
        let a = cones.max_step(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert!((a - 1.0).abs() < 1e-12);
        // Moving into the cone never exits.
        assert!(cones.max_step(&[1.0, 0.0, 0.0], &[1.0, 0.5, 0.0]).is_infinite());
        // Shrinking towards the apex: (1,0,0) + α(−1,0,0) exits at α = 1.
        let a = cones.max_step(&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0]);
        assert!((a - 1.0).abs() < 1e-12);
        assert!((cones.min_shift(&[1.0, 3.0, 4.0]) - 4.0).abs() < 1e-12);
    }
}
