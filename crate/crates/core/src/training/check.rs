use crate::error::{Error, Result};
use crate::hin::HinGraph;
use crate::model::{forward, Mode, ModelParams, ParamVars};
use crate::numerics::{gradcheck, GradcheckReport, Matrix, Tape};
use crate::rng;

use super::loss::{cross_entropy_loss, LabeledSet};

/// End-to-end gradient check of the training loss (eval mode, so no
/// dropout) over every labeled object of every labeled type.
pub fn gradcheck_model(
    g: &HinGraph,
    params: &ModelParams,
    h: f64,
    tol: f64,
) -> Result<GradcheckReport> {
    let sets: Vec<LabeledSet> = g
        .labeled_types()
        .into_iter()
        .map(|t| {
            let rows = g.labeled_indices(t);
            let labels = g
                .labels(t)
                .map(|l| rows.iter().filter_map(|&i| l[i]).collect())
                .unwrap_or_default();
            LabeledSet {
                ty: t,
                rows,
                labels,
                weight: 1.0,
            }
        })
        .filter(|s| !s.rows.is_empty())
        .collect();
    if sets.is_empty() {
        return Err(Error::Data("gradient check needs labeled objects".into()));
    }
    let targets: Vec<usize> = sets.iter().map(|s| s.ty).collect();
    let mut work = params.clone();
    let objective = |values: &[Matrix]| -> Result<(f64, Vec<Matrix>)> {
        work.set_matrices(values)?;
        let mut tape = Tape::new();
        let vars = ParamVars::register(&mut tape, &work);
        let out = forward(
            &mut tape,
            &work,
            &vars,
            g,
            Some(&targets),
            Mode::Eval,
            &mut rng::stream(0, 0),
        )?;
        let loss = cross_entropy_loss(&mut tape, &out.outputs, &sets, g)?;
        let grads = tape.backward(loss);
        Ok((tape.value(loss).get(0, 0), vars.gradients(&tape, &grads)))
    };
    let values: Vec<Matrix> = params.matrices().into_iter().cloned().collect();
    gradcheck(objective, &values, h, tol)
}
