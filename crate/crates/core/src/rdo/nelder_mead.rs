use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simplex coefficients and stopping rules. Tolerances are measured in box
/// coordinates scaled to `[0, 1]` per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Initial vertex offsets as a fraction of each box width.
    pub initial_step: f64,
    /// Stop when the simplex diameter falls below this.
    pub x_tol: f64,
    /// Stop when the spread of vertex values falls below this.
    pub f_tol: f64,
    pub max_evals: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 0.05,
            x_tol: 1e-6,
            f_tol: 1e-6,
            max_evals: 400,
        }
    }
}

impl NelderMeadOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("nelder_mead: {m}")));
        if !(self.reflection > 0.0) {
            return bad("reflection must be positive");
        }
        if !(self.expansion > 1.0 && self.expansion > self.reflection) {
            return bad("expansion must exceed 1 and the reflection coefficient");
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return bad("contraction must lie in (0, 1)");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.initial_step > 0.0 && self.initial_step <= 0.5) {
            return bad("initial_step must lie in (0, 0.5]");
        }
        if !(self.x_tol >= 0.0 && self.f_tol >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        if self.max_evals == 0 {
            return bad("max_evals must be positive");
        }
        Ok(())
    }
}

/// Which move produced a simplex iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Start,
    Reflect,
    Expand,
    ContractOutside,
    ContractInside,
    Shrink,
}

/// Best vertex after an iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct NmRecord<P> {
    pub iteration: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub payload: P,
    pub step: Step,
    /// Whether the best value dropped during this iteration.
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmOutcome<P> {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub best_payload: P,
    /// Entry 0 is the starting point; entry `k` the best vertex after
    /// iteration `k`.
    pub trajectory: Vec<NmRecord<P>>,
    pub evaluations: usize,
    /// False when `max_evals` ran out first.
    pub converged: bool,
}

struct Vertex<P> {
    u: Vec<f64>,
    x: Vec<f64>,
    f: f64,
    p: P,
}

/// Box-constrained Nelder–Mead. `f` returns the objective and a payload that
/// is carried into the trajectory. Proposals are clipped to the box.
pub fn nelder_mead_with<P, F>(
    mut f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &NelderMeadOptions,
) -> Result<NmOutcome<P>>
where
    P: Clone,
    F: FnMut(&[f64]) -> (f64, P),
{
    opts.validate()?;
    let n = x0.len();
    if n == 0 || bounds.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} start coordinates for {} bounds",
            n,
            bounds.len()
        )));
    }
    for (k, (&x, &(lo, hi))) in x0.iter().zip(bounds).enumerate() {
        if !(lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "empty bound [{lo}, {hi}] in dimension {k}"
            )));
        }
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfBounds(format!(
                "start coordinate {k} = {x} outside [{lo}, {hi}]"
            )));
        }
    }
    let to_x = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(bounds)
            .map(|(&u, &(lo, hi))| if u >= 1.0 { hi } else { lo + u * (hi - lo) })
            .collect()
    };
    let clip = |u: Vec<f64>| -> Vec<f64> { u.into_iter().map(|v| v.clamp(0.0, 1.0)).collect() };

    let mut evals = 0usize;
    // `x` overrides the mapped point so the start is evaluated at the
    // caller's coordinates rather than their round trip through the unit box.
    let mut eval = |u: Vec<f64>, x: Option<&[f64]>, evals: &mut usize| -> Vertex<P> {
        *evals += 1;
        let x = x.map_or_else(|| to_x(&u), <[f64]>::to_vec);
        let (v, p) = f(&x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        Vertex { u, x, f: v, p }
    };

    let u0: Vec<f64> = x0
        .iter()
        .zip(bounds)
        .map(|(&x, &(lo, hi))| (x - lo) / (hi - lo))
        .collect();
    let start = eval(u0.clone(), Some(x0), &mut evals);
    let mut trajectory = vec![NmRecord {
        iteration: 0,
        point: x0.to_vec(),
        value: start.f,
        payload: start.p.clone(),
        step: Step::Start,
        improved: false,
    }];
    let mut simplex = vec![start];
    for k in 0..n {
        let mut u = u0.clone();
        u[k] += if u[k] + opts.initial_step <= 1.0 {
            opts.initial_step
        } else {
            -opts.initial_step
        };
        simplex.push(eval(u, None, &mut evals));
    }

    let order = |s: &mut Vec<Vertex<P>>| s.sort_by(|a, b| a.f.total_cmp(&b.f));
    let mut converged = false;
    let mut iteration = 0;
    loop {
        order(&mut simplex);
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.u.iter().zip(&simplex[0].u).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread = simplex[n].f - simplex[0].f;
        if diameter < opts.x_tol || spread < opts.f_tol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
        iteration += 1;
        let prev_best = trajectory.last().map_or(f64::INFINITY, |r| r.value);

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(&v.u) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64, from: &[f64]| -> Vec<f64> {
            clip(centroid.iter().zip(from).map(|(c, w)| c + t * (w - c)).collect())
        };
        let worst = simplex[n].u.clone();
        let reflected = eval(along(-opts.reflection, &worst), None, &mut evals);
        let step = if reflected.f < simplex[0].f {
            let expanded = eval(along(-opts.reflection * opts.expansion, &worst), None, &mut evals);
            if expanded.f < reflected.f {
                simplex[n] = expanded;
                Step::Expand
            } else {
                simplex[n] = reflected;
                Step::Reflect
            }
        } else if reflected.f < simplex[n - 1].f {
            simplex[n] = reflected;
            Step::Reflect
        } else {
            let (trial, kind) = if reflected.f < simplex[n].f {
                (
                    eval(along(-opts.reflection * opts.contraction, &worst), None, &mut evals),
                    Step::ContractOutside,
                )
            } else {
                (
                    eval(along(opts.contraction, &worst), None, &mut evals),
                    Step::ContractInside,
                )
            };
            let accept = match kind {
                Step::ContractOutside => trial.f <= reflected.f,
                _ => trial.f < simplex[n].f,
            };
            if accept {
                simplex[n] = trial;
                kind
            } else {
                let best = simplex[0].u.clone();
                for v in simplex.iter_mut().skip(1) {
                    let u = clip(best.iter().zip(&v.u).map(|(b, x)| b + opts.shrink * (x - b)).collect());
                    *v = eval(u, None, &mut evals);
                }
                Step::Shrink
            }
        };
        let best = simplex
            .iter()
            .min_by(|a, b| a.f.total_cmp(&b.f))
            .expect("simplex is non-empty");
        let value = best.f.min(prev_best);
        let rec = if best.f <= prev_best {
            NmRecord {
                iteration,
                point: best.x.clone(),
                value,
                payload: best.p.clone(),
                step,
                improved: best.f < prev_best,
            }
        } else {
            // The start point can beat every vertex only before the first
            // sort; keep reporting it.
            let last = trajectory.last().expect("trajectory starts with the initial point");
            NmRecord {
                iteration,
                point: last.point.clone(),
                value,
                payload: last.payload.clone(),
                step,
                improved: false,
            }
        };
        trajectory.push(rec);
    }
    let best = &simplex[0];
    Ok(NmOutcome {
        best: best.x.clone(),
        best_value: best.f,
        best_payload: best.p.clone(),
        trajectory,
        evaluations: evals,
        converged,
    })
}

/// [`nelder_mead_with`] for a plain objective.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], bounds: &[(f64, f64)], opts: &NelderMeadOptions) -> Result<NmOutcome<()>>
where
    F: FnMut(&[f64]) -> f64,
{
    nelder_mead_with(|x| (f(x), ()), x0, bounds, opts)
}
