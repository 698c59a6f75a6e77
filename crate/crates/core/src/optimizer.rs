//! Projected gradient descent with a fixed step over a box of admissible
//! parameters:
//!
//! ```text
//! p_{k+1} = Π[p_k - α J̃'(p_k)]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::Parameters;
use crate::objective::{GradientVector, Problem};

/// Componentwise bounds on `(c_c, c_d, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibleBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Default for AdmissibleBox {
    fn default() -> Self {
        Self {
            lo: [0.01, 0.01, 0.0],
            hi: [1.0, 1.0, 2.0],
        }
    }
}

impl AdmissibleBox {
    pub fn validate(&self) -> Result<()> {
        for j in 0..3 {
            if !(self.lo[j] < self.hi[j]) || !self.lo[j].is_finite() || !self.hi[j].is_finite() {
                return Err(Error::Config(format!(
                    "box bounds for {} must satisfy lo < hi (got [{}, {}])",
                    Parameters::NAMES[j],
                    self.lo[j],
                    self.hi[j]
                )));
            }
        }
        // c_c and c_d appear as denominators
        if self.lo[0] <= 0.0 || self.lo[1] <= 0.0 {
            return Err(Error::Config("box must keep c_c and c_d positive".into()));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Parameters) -> bool {
        p.to_array()
            .iter()
            .enumerate()
            .all(|(j, &x)| x >= self.lo[j] && x <= self.hi[j])
    }

    /// Componentwise clamp onto the box.
    pub fn project(&self, p: &Parameters) -> Parameters {
        let mut a = p.to_array();
        for (j, x) in a.iter_mut().enumerate() {
            *x = x.clamp(self.lo[j], self.hi[j]);
        }
        Parameters::from_array(a)
    }
}

/// Step length, box and stopping tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub alpha: f64,
    #[serde(rename = "box")]
    pub bounds: AdmissibleBox,
    pub tol_j: f64,
    pub tol_step: f64,
    pub tol_grad: f64,
    pub max_iter: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            bounds: AdmissibleBox::default(),
            tol_j: 1e-6,
            tol_step: 1e-6,
            tol_grad: 1e-12,
            max_iter: 300,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive (got {})", self.alpha)));
        }
        if !(self.tol_j > 0.0 && self.tol_step > 0.0 && self.tol_grad > 0.0) {
            return Err(Error::Config("optimizer tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Which stopping rule ended a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    Functional,
    Gradient,
    Step,
    MaxIter,
}

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub p: Parameters,
    pub j: f64,
    pub gradient: GradientVector,
    /// `|p_k - p_{k-1}|`, zero at `k = 0`.
    pub step_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    /// Iterate with the smallest `J` seen.
    pub p_final: Parameters,
    pub j_final: f64,
    /// Every rule satisfied at the last iterate, in the order J, gradient, step.
    pub stopped_by: Vec<StopRule>,
    /// `J` rose on 5 consecutive iterations at some point.
    pub step_size_warning: bool,
    pub trace: Vec<IterationRecord>,
}

/// A solver failure during optimization, with the trace up to that point.
#[derive(Debug, thiserror::Error)]
#[error("optimization aborted at iteration {iteration}: {source}")]
pub struct Aborted {
    pub iteration: usize,
    #[source]
    pub source: Error,
    pub trace: Vec<IterationRecord>,
}

pub fn minimize(
    problem: &Problem,
    p0: &Parameters,
    cfg: &OptimizerConfig,
) -> std::result::Result<OptimizationResult, Aborted> {
    let abort = |iteration, source, trace: &Vec<IterationRecord>| Aborted {
        iteration,
        source,
        trace: trace.clone(),
    };
    let mut trace: Vec<IterationRecord> = Vec::new();
    if let Err(e) = cfg.validate().and_then(|_| p0.validate()) {
        return Err(abort(0, e, &trace));
    }
    if !cfg.bounds.contains(p0) {
        let e = Error::Config(format!("initial point {p0:?} lies outside the admissible box"));
        return Err(abort(0, e, &trace));
    }

    let mut p = *p0;
    let mut step_norm = 0.0;
    let mut rises = 0;
    let mut step_size_warning = false;
    let mut k = 0;
    let stopped_by = loop {
        let eval = match problem.evaluate(&p) {
            Ok(e) => e,
            Err(e) => return Err(abort(k, e, &trace)),
        };
        let (j, g) = (eval.j, eval.gradient);
        if let Some(prev) = trace.last() {
            if j > prev.j {
                rises += 1;
                if rises == 5 && !step_size_warning {
                    step_size_warning = true;
                    log::warn!(
                        "J increased on 5 consecutive iterations; step length {} may be too large",
                        cfg.alpha
                    );
                }
            } else {
                rises = 0;
            }
        }
        trace.push(IterationRecord {
            k,
            p,
            j,
            gradient: g,
            step_norm,
        });
        log::debug!("iter {k}: J = {j:.6e}, |g| = {:.3e}, p = {:?}", g.norm(), p.to_array());

        let mut rules = Vec::new();
        if j < cfg.tol_j {
            rules.push(StopRule::Functional);
        }
        if g.norm() < cfg.tol_grad {
            rules.push(StopRule::Gradient);
        }
        if k > 0 && step_norm < cfg.tol_step {
            rules.push(StopRule::Step);
        }
        if rules.is_empty() && k == cfg.max_iter {
            rules.push(StopRule::MaxIter);
        }
        if !rules.is_empty() {
            break rules;
        }

        let mut next = p.to_array();
        for (x, gj) in next.iter_mut().zip(g.0) {
            *x -= cfg.alpha * gj;
        }
        let next = cfg.bounds.project(&Parameters::from_array(next));
        step_norm = next.distance(&p);
        p = next;
        k += 1;
    };

    let best = trace
        .iter()
        .min_by(|a, b| a.j.total_cmp(&b.j))
        .copied()
        .expect("trace holds at least one record");
    Ok(OptimizationResult {
        p_final: best.p,
        j_final: best.j,
        stopped_by,
        step_size_warning,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_clamps_componentwise() {
        let unit = AdmissibleBox {
            lo: [0.0; 3],
            hi: [1.0; 3],
        };
        let p = Parameters::from_array([-1.0, 0.5, 3.0]);
        assert_eq!(unit.project(&p).to_array(), [0.0, 0.5, 1.0]);
        let inside = Parameters::standard();
        assert_eq!(AdmissibleBox::default().project(&inside), inside);
    }

    #[test]
    fn invalid_configs() {
        let bad = AdmissibleBox {
            lo: [0.5, 0.01, 0.0],
            hi: [0.4, 1.0, 2.0],
        };
        assert!(bad.validate().is_err());
        assert!(OptimizerConfig {
            alpha: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig {
            tol_step: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig::default().validate().is_ok());
    }

    fn arb_point() -> impl Strategy<Value = Parameters> {
        proptest::array::uniform3(-2.0f64..3.0).prop_map(Parameters::from_array)
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_nonexpansive(p in arb_point(), q in arb_point()) {
            let b = AdmissibleBox::default();
            let pp = b.project(&p);
            prop_assert!(b.contains(&pp));
            prop_assert_eq!(b.project(&pp), pp);
            prop_assert!(pp.distance(&b.project(&q)) <= p.distance(&q) + 1e-15);
        }
    }
}
