//! Box-constrained damped Newton ascent.
//!
//! Coordinates sitting on a bound with the gradient pointing outward are
//! frozen for the step; the rest take a Newton step on the negated Hessian,
//! shifted by a multiple of the identity when that is not positive
//! definite. A backtracking line search only accepts steps that do not
//! decrease the objective, so the log-likelihood trace is monotone.

use nalgebra::{DMatrix, DVector};

pub(crate) const GRAD_TOL: f64 = 1e-6;
pub(crate) const REL_TOL: f64 = 1e-8;
/// Relative bound on the predicted gain of a full Newton step at convergence.
const DECREMENT_TOL: f64 = 1e-12;
pub(crate) const MAX_ITER: usize = 200;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// Largest change to any coordinate in one step.
const MAX_STEP: f64 = 30.0;

#[derive(Debug, Clone)]
pub(crate) struct Eval {
    pub ll: f64,
    pub grad: Vec<f64>,
    /// Row-major p×p.
    pub hess: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(p: usize) -> Self {
        Self {
            lo: vec![f64::NEG_INFINITY; p],
            hi: vec![f64::INFINITY; p],
        }
    }

    pub fn project(&self, theta: &mut [f64]) {
        for (i, t) in theta.iter_mut().enumerate() {
            *t = t.clamp(self.lo[i], self.hi[i]);
        }
    }

    /// Index is on a bound and the gradient pushes it outward.
    pub fn blocks(&self, i: usize, theta: f64, grad: f64) -> bool {
        (theta <= self.lo[i] && grad <= 0.0) || (theta >= self.hi[i] && grad >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Status {
    Converged,
    /// No ascent step could be found along the Newton direction.
    Stalled,
    MaxIter,
    /// The objective is not finite at the starting point.
    BadStart,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub theta: Vec<f64>,
    pub eval: Eval,
    pub iterations: usize,
    pub status: Status,
    pub trace: Vec<f64>,
}

/// Indices that are neither fixed nor blocked by a bound.
pub(crate) fn active_set(theta: &[f64], grad: &[f64], fixed: &[bool], bounds: &Bounds) -> Vec<usize> {
    (0..theta.len())
        .filter(|&i| !fixed[i] && !bounds.blocks(i, theta[i], grad[i]))
        .collect()
}

fn newton_direction(ev: &Eval, active: &[usize], p: usize) -> Option<(DVector<f64>, bool)> {
    let k = active.len();
    let neg_h = DMatrix::from_fn(k, k, |r, c| -ev.hess[active[r] * p + active[c]]);
    let g = DVector::from_iterator(k, active.iter().map(|&i| ev.grad[i]));
    if let Some(ch) = neg_h.clone().cholesky() {
        return Some((ch.solve(&g), true));
    }
    let scale = neg_h.diagonal().iter().fold(1e-8_f64, |m, v| m.max(v.abs()));
    let min_eig = neg_h.clone().symmetric_eigenvalues().min();
    let mut mu = 2.0 * min_eig.min(0.0).abs() + 1e-6 * scale;
    for _ in 0..40 {
        let shifted = &neg_h + DMatrix::identity(k, k) * mu;
        if let Some(ch) = shifted.cholesky() {
            return Some((ch.solve(&g), false));
        }
        mu *= 10.0;
    }
    None
}

pub(crate) fn maximize<F>(
    mut f: F,
    start: &[f64],
    bounds: &Bounds,
    fixed: &[bool],
    max_iter: usize,
) -> Outcome
where
    F: FnMut(&[f64], bool) -> Eval,
{
    let p = start.len();
    let mut theta = start.to_vec();
    bounds.project(&mut theta);
    let mut ev = f(&theta, true);
    let mut trace = vec![ev.ll];
    if !ev.ll.is_finite() {
        return Outcome {
            theta,
            eval: ev,
            iterations: 0,
            status: Status::BadStart,
            trace,
        };
    }

    let mut status = Status::MaxIter;
    let mut iterations = 0;
    while iterations < max_iter {
        let active = active_set(&theta, &ev.grad, fixed, bounds);
        let gmax = active.iter().fold(0.0_f64, |m, &i| m.max(ev.grad[i].abs()));
        if gmax < GRAD_TOL {
            status = Status::Converged;
            break;
        }
        iterations += 1;
        let Some((mut dir, mut pure)) = newton_direction(&ev, &active, p) else {
            status = Status::Stalled;
            break;
        };
        if pure {
            // predicted gain of the full Newton step
            let gain: f64 = active.iter().enumerate().map(|(k, &i)| ev.grad[i] * dir[k]).sum::<f64>() * 0.5;
            if gain < DECREMENT_TOL * ev.ll.abs().max(1.0) {
                status = Status::Converged;
                iterations -= 1;
                break;
            }
        }
        let longest = dir.amax();
        if longest > MAX_STEP {
            dir *= MAX_STEP / longest;
            pure = false;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut cand = theta.clone();
            for (k, &i) in active.iter().enumerate() {
                cand[i] += t * dir[k];
            }
            bounds.project(&mut cand);
            let slope: f64 = (0..p).map(|i| ev.grad[i] * (cand[i] - theta[i])).sum();
            let trial = f(&cand, false);
            if trial.ll.is_finite() && trial.ll >= ev.ll + ARMIJO * slope.max(0.0) {
                accepted = Some((cand, trial.ll));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, ll_new)) = accepted else {
            status = Status::Stalled;
            break;
        };

        let rel = (ll_new - ev.ll).abs() / ev.ll.abs().max(1.0);
        theta = cand;
        ev = f(&theta, true);
        trace.push(ev.ll);
        if pure && t == 1.0 && rel < REL_TOL {
            status = Status::Converged;
            break;
        }
    }
    Outcome {
        theta,
        eval: ev,
        iterations,
        status,
        trace,
    }
}
