//! Central finite-difference checks of analytic gradients.

use super::tape::{Graph, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Default finite-difference step.
pub const STEP: f64 = 1e-5;
/// Denominator floor in [`relative_error`], so that two near-zero values compare by absolute error.
pub const REL_FLOOR: f64 = 1e-6;
/// Steps are shrunk this many times (by 10×) when a perturbation crosses a relu or max-pool switch.
const MAX_SHRINKS: usize = 1;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// (input index, flat coordinate) of the worst mismatch.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    /// Coordinates that needed a smaller step to stay on one smooth piece.
    pub shrunk: usize,
    /// Coordinates where every step crossed a switch; not compared.
    pub unresolved: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.unresolved == 0 && self.max_rel_err < tol
    }

    pub fn merge(&mut self, other: &GradCheckReport, offset: usize) {
        if other.max_rel_err > self.max_rel_err {
            self.max_rel_err = other.max_rel_err;
            self.worst = other.worst.map(|(i, j)| (i + offset, j));
        }
        self.checked += other.checked;
        self.shrunk += other.shrunk;
        self.unresolved += other.unresolved;
    }
}

fn evaluate<F>(inputs: &[Tensor], f: &F) -> Result<(Graph, Vec<NodeId>, NodeId)>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&mut g, &ids)?;
    if g.value(out).len() != 1 {
        return Err(Error::Graph(format!("gradient check needs a scalar output, got {:?}", g.shape(out))));
    }
    Ok((g, ids, out))
}

/// Compares `d f / d inputs` from [`Graph::backward`] against central
/// differences over every input coordinate.
pub fn check_gradients<F>(inputs: &[Tensor], f: F, step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let (mut g, ids, out) = evaluate(inputs, &f)?;
    let signature = g.branch_signature();
    g.backward(out)?;
    let analytic: Vec<Vec<f64>> =
        ids.iter().zip(inputs).map(|(&id, t)| g.grad(id).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec)).collect();

    let mut report = GradCheckReport::default();
    let mut work = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        for (j, &orig) in input.data().iter().enumerate() {
            let mut h = step;
            let mut numeric = None;
            for attempt in 0..=MAX_SHRINKS {
                work[i].data_mut()[j] = orig + h;
                let (gp, _, op) = evaluate(&work, &f)?;
                work[i].data_mut()[j] = orig - h;
                let (gm, _, om) = evaluate(&work, &f)?;
                work[i].data_mut()[j] = orig;
                if gp.branch_signature() == signature && gm.branch_signature() == signature {
                    numeric = Some((gp.value(op).data()[0] - gm.value(om).data()[0]) / (2.0 * h));
                    if attempt > 0 {
                        report.shrunk += 1;
                    }
                    break;
                }
                h /= 10.0;
            }
            match numeric {
                None => report.unresolved += 1,
                Some(n) => {
                    report.checked += 1;
                    let e = relative_error(analytic[i][j], n);
                    if e > report.max_rel_err || report.worst.is_none() {
                        report.max_rel_err = report.max_rel_err.max(e);
                        report.worst = Some((i, j));
                    }
                }
            }
        }
    }
    Ok(report)
}
