//! IQM with a stratified bootstrap interval, effective rank and the overlap
//! coefficient on small hand-made inputs.

use std::collections::BTreeSet;

use redo_lab::dormancy::overlap_coefficient;
use redo_lab::metrics::{aggregate, effective_rank, iqm, RunMatrix, Statistic};
use redo_lab::nn::Matrix;
use redo_lab::rng;

fn main() -> redo_lab::Result<()> {
    println!("iqm([1, 2, 3, 4]) = {}", iqm(&[1.0, 2.0, 3.0, 4.0])?);

    let runs = RunMatrix::new(vec![vec![0.9, 1.0, 0.7, 0.95, 0.2], vec![0.5, 0.55, 0.6, 0.4, 0.45]])?;
    let mut r = rng::seeded(0, rng::stream::BOOTSTRAP);
    let agg = aggregate(&runs, Statistic::Iqm, 2000, 0.05, &mut r)?;
    println!("IQM over 2 tasks x 5 seeds: {:.3} [{:.3}, {:.3}]", agg.point, agg.ci_lo, agg.ci_hi);

    println!("effective rank of I_100: {}", effective_rank(&Matrix::identity(100), 0.01)?);
    let features = Matrix::from_rows(&[[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1e-3]])?;
    println!("effective rank of a nearly rank-1 matrix: {}", effective_rank(&features, 0.01)?);

    let x: BTreeSet<usize> = [1, 2].into();
    let y: BTreeSet<usize> = [2, 3].into();
    println!("overlap({{1,2}}, {{2,3}}) = {:?}", overlap_coefficient(&x, &y));
    Ok(())
}
