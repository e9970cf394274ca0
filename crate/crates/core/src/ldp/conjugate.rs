use nalgebra::DVector;

use super::noise::NoiseModel;
use super::LdpError;

const MAX_ITER: usize = 200;
const GRAD_TOL: f64 = 1e-10;
const UNBOUNDED: f64 = 1e12;

/// `sup_p ⟨w, p⟩ − K(p)` for the error CGF `K` of `noise` at level `value`.
///
/// Ascent with Armijo backtracking from the Gaussian warm start
/// `p = w / σ̄²`. Steps follow the Newton direction when the CGF Hessian is
/// positive definite and the gradient otherwise. Returns `+∞` when the
/// objective grows without bound (`w` outside the support's convex hull).
pub fn maximize_conjugate<N: NoiseModel + ?Sized>(
    noise: &N,
    value: f64,
    w: &[f64],
) -> Result<f64, LdpError> {
    let d = w.len();
    let wv = DVector::from_column_slice(w);
    let proxy = noise.variance_proxy(value);
    if !(proxy > 0.0) {
        return Err(LdpError::NonPositiveVariance {
            level: value,
            variance: proxy,
        });
    }
    let mut p = &wv / proxy;
    let eval = |p: &DVector<f64>| -> Option<(f64, DVector<f64>, nalgebra::DMatrix<f64>)> {
        let c = noise.error_cgf_derivatives(value, p.as_slice()).ok()?;
        let g = wv.dot(p) - c.value;
        g.is_finite().then(|| (g, &wv - &c.gradient, c.hessian))
    };
    let (mut g, mut grad, mut hess) = match eval(&p) {
        Some(t) => t,
        None => {
            p = DVector::zeros(d);
            eval(&p).ok_or(LdpError::Overflow)?
        }
    };
    for _ in 0..MAX_ITER {
        if g > UNBOUNDED {
            return Ok(f64::INFINITY);
        }
        if grad.norm() < GRAD_TOL {
            return Ok(g.max(0.0));
        }
        let newton = hess.clone().cholesky().map(|ch| ch.solve(&grad));
        // close to the optimum the gain in g drops below its rounding, so
        // plain Newton steps are judged by the gradient instead
        if let Some(dir) = &newton {
            if grad.norm() < 1e-6 * (1.0 + wv.norm()) {
                if let Some((gc, gradc, hessc)) = eval(&(&p + dir)) {
                    if gradc.norm() < grad.norm() {
                        p += dir;
                        (g, grad, hess) = (gc, gradc, hessc);
                        continue;
                    }
                }
            }
        }
        let mut accepted = false;
        for dir in newton.into_iter().chain(std::iter::once(grad.clone())) {
            let slope = grad.dot(&dir);
            if !(slope > 0.0) {
                continue;
            }
            let mut t = 1.0;
            for _ in 0..60 {
                let cand = &p + &dir * t;
                if cand == p {
                    break;
                }
                if let Some((gc, gradc, hessc)) = eval(&cand) {
                    if gc >= g + 1e-4 * t * slope {
                        let (mut pb, mut gb, mut gradb, mut hessb) = (cand, gc, gradc, hessc);
                        // a full step that succeeds may be far too short
                        // when the objective is unbounded, so keep doubling
                        while t >= 1.0 && gb <= UNBOUNDED {
                            let far = &pb + &dir * t;
                            match eval(&far) {
                                Some((gf, gradf, hessf)) if gf > gb + 1e-4 * t * slope => {
                                    pb = far;
                                    gb = gf;
                                    gradb = gradf;
                                    hessb = hessf;
                                    t *= 2.0;
                                }
                                _ => break,
                            }
                        }
                        p = pb;
                        g = gb;
                        grad = gradb;
                        hess = hessb;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            // no ascent available at double precision
            return if grad.norm() < 1e-6 * (1.0 + wv.norm()) {
                Ok(g.max(0.0))
            } else {
                Err(LdpError::NonConvergence {
                    best_lower_bound: g.max(0.0),
                })
            };
        }
    }
    if g > UNBOUNDED {
        return Ok(f64::INFINITY);
    }
    if grad.norm() < GRAD_TOL {
        return Ok(g.max(0.0));
    }
    Err(LdpError::NonConvergence {
        best_lower_bound: g.max(0.0),
    })
}
