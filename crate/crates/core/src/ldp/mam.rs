use serde::{Deserialize, Serialize};

use super::action::{segment_action, DiscretePath, SegmentScratch};
use super::noise::NoiseModel;
use super::LdpError;
use crate::landscape::Objective;

/// Settings for the minimum-action path search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MamConfig {
    pub n_nodes: usize,
    pub max_iter: usize,
    pub reparam_every: usize,
    /// Convergence when the best action drops by less than this over `window` iterations.
    pub tol: f64,
    pub window: usize,
    pub subsamples: usize,
}

impl Default for MamConfig {
    fn default() -> Self {
        MamConfig {
            n_nodes: 100,
            max_iter: 5000,
            reparam_every: 10,
            tol: 1e-8,
            window: 50,
            subsamples: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MamResult {
    pub path: DiscretePath,
    pub action: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when an interior node sat on a critical point and was pushed aside.
    pub singular_speed: bool,
    /// Best action after each iteration; non-increasing.
    pub history: Vec<f64>,
}

struct Problem<'a> {
    obj: &'a dyn Objective,
    noise: &'a dyn NoiseModel,
    subsamples: usize,
    speed_floor: f64,
}

impl Problem<'_> {
    /// Time to traverse `a → b` at the local gradient speed.
    fn segment_time(&self, a: &[f64], b: &[f64], g: &mut [f64], mid: &mut [f64]) -> f64 {
        for k in 0..a.len() {
            mid[k] = 0.5 * (a[k] + b[k]);
        }
        self.obj.gradient(mid, g);
        dist(a, b) / norm(g).max(self.speed_floor)
    }

    fn segment(&self, a: &[f64], b: &[f64], ws: &mut Workspace) -> Result<f64, LdpError> {
        let dt = self.segment_time(a, b, &mut ws.g, &mut ws.mid);
        if dt == 0.0 {
            return Ok(0.0);
        }
        segment_action(self.obj, self.noise, a, b, dt, self.subsamples, &mut ws.seg)
    }

    fn total(&self, pts: &[Vec<f64>], ws: &mut Workspace) -> Result<f64, LdpError> {
        let mut s = 0.0;
        for k in 0..pts.len() - 1 {
            s += self.segment(&pts[k], &pts[k + 1], ws)?;
        }
        Ok(s)
    }

    fn timed_path(&self, pts: &[Vec<f64>], ws: &mut Workspace) -> Result<DiscretePath, LdpError> {
        let mut times = vec![0.0];
        for k in 0..pts.len() - 1 {
            let dt = self.segment_time(&pts[k], &pts[k + 1], &mut ws.g, &mut ws.mid);
            times.push(times[k] + dt);
        }
        DiscretePath::new(pts.to_vec(), times)
    }

    /// Central-difference gradient of the action in the interior nodes.
    fn gradient(&self, pts: &mut [Vec<f64>], h: f64, ws: &mut Workspace) -> Result<Vec<Vec<f64>>, LdpError> {
        let n = pts.len();
        let d = pts[0].len();
        let mut out = vec![vec![0.0; d]; n];
        for k in 1..n - 1 {
            for i in 0..d {
                let orig = pts[k][i];
                pts[k][i] = orig + h;
                let plus = self.segment(&pts[k - 1], &pts[k], ws)? + self.segment(&pts[k], &pts[k + 1], ws)?;
                pts[k][i] = orig - h;
                let minus = self.segment(&pts[k - 1], &pts[k], ws)? + self.segment(&pts[k], &pts[k + 1], ws)?;
                pts[k][i] = orig;
                out[k][i] = (plus - minus) / (2.0 * h);
            }
        }
        Ok(out)
    }
}

struct Workspace {
    g: Vec<f64>,
    mid: Vec<f64>,
    seg: SegmentScratch,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

const LBFGS_MEMORY: usize = 8;

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Interior node coordinates as one vector.
fn flatten(pts: &[Vec<f64>]) -> Vec<f64> {
    pts[1..pts.len() - 1].iter().flatten().copied().collect()
}

fn unflatten(x: &[f64], like: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = like[0].len();
    let mut out = Vec::with_capacity(like.len());
    out.push(like[0].clone());
    out.extend(x.chunks(d).map(|c| c.to_vec()));
    out.push(like[like.len() - 1].clone());
    out
}

/// Two-loop recursion: `−H g` for the limited-memory inverse Hessian `H`.
fn lbfgs_direction(g: &[f64], memory: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y) in memory.iter().rev() {
        let rho = 1.0 / dotv(y, s);
        let a = rho * dotv(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push((a, rho));
    }
    if let Some((s, y)) = memory.last() {
        let gamma = dotv(s, y) / dotv(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y), (a, rho)) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dotv(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn path_length(pts: &[Vec<f64>]) -> f64 {
    pts.windows(2).map(|w| dist(&w[0], &w[1])).sum()
}

/// Redistributes nodes to equal arc length along the polyline.
fn equalize(pts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = pts.len();
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        cum.push(cum[cum.len() - 1] + dist(&w[0], &w[1]));
    }
    let total = cum[n - 1];
    let mut out = Vec::with_capacity(n);
    out.push(pts[0].clone());
    let mut seg = 0;
    for j in 1..n - 1 {
        let s = total * j as f64 / (n - 1) as f64;
        while seg < n - 2 && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        out.push(
            pts[seg]
                .iter()
                .zip(&pts[seg + 1])
                .map(|(a, b)| a + t * (b - a))
                .collect(),
        );
    }
    out.push(pts[n - 1].clone());
    out
}

/// Unit vector orthogonal to `t` (Gram–Schmidt against the coordinate axes).
fn orthogonal_to(t: &[f64]) -> Option<Vec<f64>> {
    let tn = norm(t);
    if tn == 0.0 || t.len() < 2 {
        return None;
    }
    let (axis, _) = t
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap();
    let mut e = vec![0.0; t.len()];
    e[axis] = 1.0;
    let c = t[axis] / (tn * tn);
    for i in 0..t.len() {
        e[i] -= c * t[i];
    }
    let en = norm(&e);
    Some(e.into_iter().map(|x| x / en).collect())
}

/// Locally minimal action over paths from `from` to `to`.
///
/// Node times follow the speed rule `‖γ̇‖ = ‖∇f(γ)‖`, so the optimization runs
/// over node positions only; the horizon is an output. Interior nodes move
/// by limited-memory BFGS steps with backtracking on the total action and
/// are redistributed to equal arc length every `reparam_every` iterations.
pub fn minimize_action(
    obj: &dyn Objective,
    noise: &dyn NoiseModel,
    from: &[f64],
    to: &[f64],
    cfg: &MamConfig,
) -> Result<MamResult, LdpError> {
    let d = obj.dim();
    for x in [from, to] {
        if x.len() != d {
            return Err(LdpError::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        if !obj.domain().contains(x) {
            return Err(LdpError::OutsideDomain(x.to_vec()));
        }
    }
    if cfg.n_nodes < 10 {
        return Err(LdpError::InvalidPath(format!(
            "n_nodes must be at least 10, got {}",
            cfg.n_nodes
        )));
    }
    if from == to {
        let path = DiscretePath::new(vec![from.to_vec(), to.to_vec()], vec![0.0, 1.0])?;
        return Ok(MamResult {
            path,
            action: 0.0,
            iterations: 0,
            converged: true,
            singular_speed: false,
            history: vec![0.0],
        });
    }

    let straight = DiscretePath::straight(from, to, cfg.n_nodes, 1.0)?;
    let mut pts = straight.points;
    let mut ws = Workspace {
        g: vec![0.0; d],
        mid: vec![0.0; d],
        seg: SegmentScratch::new(d),
    };
    let gscale = pts
        .iter()
        .map(|p| {
            obj.gradient(p, &mut ws.g);
            norm(&ws.g)
        })
        .fold(0.0, f64::max);
    let problem = Problem {
        obj,
        noise,
        subsamples: cfg.subsamples.max(1),
        speed_floor: 1e-10 * (1.0 + gscale),
    };
    let singular_tol = 1e-7 * (1.0 + gscale);
    let mut singular_speed = false;

    let mut current = problem.total(&pts, &mut ws)?;
    let mut best = (current, pts.clone());
    let mut history = vec![current];
    let mut memory: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iter {
        iterations = it;
        let seg_len = path_length(&pts) / (cfg.n_nodes - 1) as f64;
        if cfg.reparam_every > 0 && it % cfg.reparam_every == 0 {
            pts = equalize(&pts);
            for k in 1..pts.len() - 1 {
                obj.gradient(&pts[k], &mut ws.g);
                if norm(&ws.g) < singular_tol {
                    let t: Vec<f64> = (0..d).map(|i| pts[k + 1][i] - pts[k - 1][i]).collect();
                    if let Some(e) = orthogonal_to(&t) {
                        for i in 0..d {
                            pts[k][i] += 0.5 * seg_len * e[i];
                        }
                        singular_speed = true;
                    }
                }
            }
            current = problem.total(&pts, &mut ws)?;
            memory.clear();
            prev = None;
        }
        let grad = flatten(&problem.gradient(&mut pts, 1e-5 * seg_len.max(1e-12), &mut ws)?);
        let x = flatten(&pts);
        if let Some((px, pg)) = prev.take() {
            let s: Vec<f64> = x.iter().zip(&px).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = grad.iter().zip(&pg).map(|(a, b)| a - b).collect();
            if dotv(&s, &y) > 1e-12 * norm(&s) * norm(&y) {
                memory.push((s, y));
                if memory.len() > LBFGS_MEMORY {
                    memory.remove(0);
                }
            }
        }
        let gnorm = norm(&grad);
        let mut moved = false;
        if gnorm > 0.0 && gnorm.is_finite() {
            let mut dir = lbfgs_direction(&grad, &memory);
            let mut slope = dotv(&grad, &dir);
            if !(slope < 0.0) {
                memory.clear();
                dir = grad.iter().map(|g| -g).collect();
                slope = -gnorm * gnorm;
            }
            let dmax = dir.iter().map(|v| v.abs()).fold(0.0, f64::max);
            // the first move of a memory-less step is at most a tenth of a segment
            let mut alpha = if memory.is_empty() { 0.1 * seg_len / dmax } else { 1.0 };
            alpha = alpha.min(seg_len / dmax);
            for _ in 0..40 {
                let cand_x: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + alpha * b).collect();
                let cand = unflatten(&cand_x, &pts);
                let a = problem.total(&cand, &mut ws)?;
                if a <= current + 1e-4 * alpha * slope && a < current {
                    pts = cand;
                    current = a;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if moved {
                prev = Some((x, grad));
            } else {
                memory.clear();
            }
        }
        if current < best.0 {
            best = (current, pts.clone());
        }
        history.push(best.0);
        if gnorm == 0.0 {
            converged = true;
            break;
        }
        if it >= cfg.window && history[it - cfg.window] - history[it] < cfg.tol {
            converged = true;
            break;
        }
    }

    let path = problem.timed_path(&best.1, &mut ws)?;
    let result = MamResult {
        path,
        action: best.0,
        iterations,
        converged,
        singular_speed,
        history,
    };
    if converged {
        Ok(result)
    } else {
        Err(LdpError::MaxIterations(Box::new(result)))
    }
}
