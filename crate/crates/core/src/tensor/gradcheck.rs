use super::{Graph, Tensor, Var};
use crate::error::Result;

/// Worst-case agreement between autodiff and central differences for one
/// parameter tensor.
#[derive(Clone, Debug)]
pub struct GradCheckEntry {
    pub label: String,
    pub coords: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub failures: usize,
    /// Coordinates whose analytic and numeric derivatives both vanish.
    pub inactive: usize,
    /// Coordinates outside `tol` whose disagreement is below the roundoff
    /// bound of the central difference, and which therefore pass.
    pub roundoff_limited: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub tol: f64,
    pub h: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.failures == 0)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max)
    }

    pub fn coords(&self) -> usize {
        self.entries.iter().map(|e| e.coords).sum()
    }

    pub fn failures(&self) -> usize {
        self.entries.iter().map(|e| e.failures).sum()
    }

    pub fn roundoff_limited(&self) -> usize {
        self.entries.iter().map(|e| e.roundoff_limited).sum()
    }

    /// Labels of parameter tensors with no coordinate that moves the loss.
    pub fn untouched(&self) -> Vec<&str> {
        self.entries.iter().filter(|e| e.inactive == e.coords).map(|e| e.label.as_str()).collect()
    }
}

/// Magnitude below which a derivative counts as vanishing.
const INACTIVE: f64 = 1e-10;
/// Rounding-error multiple, in machine epsilons of the loss, attributed to
/// one loss evaluation.
const ROUNDOFF_ULPS: f64 = 16.0;

pub(crate) fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Compares reverse-mode gradients of `f` against `(f(p+h) − f(p−h)) / 2h`
/// for every coordinate of every parameter. A coordinate fails when its
/// relative error exceeds `tol` and its absolute disagreement exceeds the
/// rounding error of the difference quotient,
/// `ROUNDOFF_ULPS · ε · (|f(p+h)| + |f(p−h)|) / 2h`.
///
/// `f` receives a fresh graph and one variable per entry of `params`, and
/// must return a scalar loss. Parameters are restored before returning.
pub fn grad_check<F>(params: &mut [Tensor], labels: &[String], h: f64, tol: f64, mut f: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut Graph, &[Var]) -> Result<Var>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut graph = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| graph.param(p.clone())).collect();
    let loss = f(&mut graph, &vars)?;
    graph.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| graph.grad(v)).collect();
    drop(graph);

    let mut eval = |params: &[Tensor]| -> Result<f64> {
        let mut g = Graph::no_grad();
        let vars: Vec<Var> = params.iter().map(|p| g.constant(p.clone())).collect();
        let l = f(&mut g, &vars)?;
        Ok(g.item(l))
    };

    let mut entries = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let mut entry = GradCheckEntry {
            label: labels.get(pi).cloned().unwrap_or_else(|| format!("param{pi}")),
            coords: params[pi].len(),
            max_rel_err: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
            failures: 0,
            inactive: 0,
            roundoff_limited: 0,
        };
        for ci in 0..params[pi].len() {
            let orig = params[pi].data()[ci];
            params[pi].data_mut()[ci] = orig + h;
            let up = eval(params)?;
            params[pi].data_mut()[ci] = orig - h;
            let down = eval(params)?;
            params[pi].data_mut()[ci] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi].data()[ci];
            let err = rel_err(a, numeric);
            if a.abs().max(numeric.abs()) < INACTIVE {
                entry.inactive += 1;
            }
            // differences below this are not resolvable by the stencil
            let noise = ROUNDOFF_ULPS * f64::EPSILON * (up.abs() + down.abs()) / (2.0 * h);
            if err > tol {
                if (a - numeric).abs() <= noise {
                    entry.roundoff_limited += 1;
                } else {
                    entry.failures += 1;
                }
            }
            if err > entry.max_rel_err || ci == 0 {
                entry.max_rel_err = entry.max_rel_err.max(err);
                entry.worst_index = ci;
                entry.analytic = a;
                entry.numeric = numeric;
            }
        }
        entries.push(entry);
    }
    Ok(GradCheckReport { tol, h, entries })
}
