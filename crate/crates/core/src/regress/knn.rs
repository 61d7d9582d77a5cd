use std::cmp::Ordering;

use crate::series::TabularSplit;

use super::{QuantileLevels, RegressError, Regressor};

const MIN_ROWS: usize = 3;
const DISTANCE_EPS: f64 = 1e-9;

/// Reference backend: inverse-distance-weighted quantiles of the nearest
/// training rows in per-column standardized feature space.
#[derive(Debug, Clone, Copy, Default)]
pub struct KnnRegressor;

impl Regressor for KnnRegressor {
    fn name(&self) -> &str {
        "knn"
    }

    fn predict_quantiles(&self, split: &TabularSplit, levels: &QuantileLevels) -> Result<Vec<Vec<f64>>, RegressError> {
        knn_quantile_fit_predict(split, levels)
    }
}

/// `max(3, ⌈√n_train⌉)`, capped at `n_train`.
pub fn neighbor_count(n_train: usize) -> usize {
    let root = (n_train as f64).sqrt().ceil() as usize;
    root.max(MIN_ROWS).min(n_train)
}

/// Column means and scales from the training rows; constant columns get scale 0.
fn column_scaling(split: &TabularSplit) -> Vec<(f64, f64)> {
    let n = split.x_train.n_rows() as f64;
    (0..split.x_train.n_cols())
        .map(|j| {
            let col = split.x_train.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            (mean, if std < 1e-12 { 0.0 } else { 1.0 / std })
        })
        .collect()
}

fn scale_row(row: &[f64], scaling: &[(f64, f64)]) -> Vec<f64> {
    row.iter().zip(scaling).map(|(v, (m, s))| (v - m) * s).collect()
}

/// Weighted inverse CDF: the smallest target whose cumulative weight share reaches `q`.
pub(crate) fn weighted_quantiles(mut pairs: Vec<(f64, f64, usize)>, levels: &[f64]) -> Vec<f64> {
    // (target, weight, row index); ties in target ordered by row index
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut cumulative = Vec::with_capacity(pairs.len());
    let mut acc = 0.0;
    for p in &pairs {
        acc += p.1;
        cumulative.push(acc / total);
    }
    levels
        .iter()
        .map(|&q| {
            let i = cumulative.partition_point(|&c| c < q).min(pairs.len() - 1);
            pairs[i].0
        })
        .collect()
}

pub fn knn_quantile_fit_predict(split: &TabularSplit, levels: &QuantileLevels) -> Result<Vec<Vec<f64>>, RegressError> {
    let n_train = split.x_train.n_rows();
    if n_train < MIN_ROWS {
        return Err(RegressError::TooFewRows { needed: MIN_ROWS, got: n_train });
    }
    let k = neighbor_count(n_train);
    let scaling = column_scaling(split);
    let train: Vec<Vec<f64>> = split.x_train.rows().map(|r| scale_row(r, &scaling)).collect();

    let by_distance = |a: &(f64, usize), b: &(f64, usize)| -> Ordering { a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) };

    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n_train);
    let predictions = split
        .x_test
        .rows()
        .map(|row| {
            let query = scale_row(row, &scaling);
            dists.clear();
            dists.extend(train.iter().enumerate().map(|(i, t)| {
                let sq: f64 = t.iter().zip(&query).map(|(a, b)| (a - b) * (a - b)).sum();
                (sq, i)
            }));
            if k < n_train {
                dists.select_nth_unstable_by(k - 1, by_distance);
            }
            let neighbors: Vec<(f64, f64, usize)> = dists[..k]
                .iter()
                .map(|&(sq, i)| (split.y_train[i], 1.0 / (sq.sqrt() + DISTANCE_EPS), i))
                .collect();
            weighted_quantiles(neighbors, levels.as_slice())
        })
        .collect();
    Ok(predictions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::FeatureMatrix;

    fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let names = (0..rows[0].len()).map(|j| format!("f{j}")).collect();
        FeatureMatrix::from_rows(names, rows).unwrap()
    }

    #[test]
    fn neighbor_rule() {
        assert_eq!(neighbor_count(3), 3);
        assert_eq!(neighbor_count(9), 3);
        assert_eq!(neighbor_count(10), 4);
        assert_eq!(neighbor_count(800), 29);
    }

    #[test]
    fn duplicated_single_point() {
        let split = TabularSplit::new(matrix(vec![vec![1.0, 2.0]; 5]), vec![7.0; 5], matrix(vec![vec![-3.0, 8.0]])).unwrap();
        let out = knn_quantile_fit_predict(&split, &QuantileLevels::fine_grid()).unwrap();
        assert_eq!(out, vec![vec![7.0; 19]]);
    }

    #[test]
    fn exact_match_dominates() {
        let x: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..9).map(|i| (i * i) as f64).collect();
        let split = TabularSplit::new(matrix(x), y, matrix(vec![vec![4.0], vec![0.0], vec![8.0]])).unwrap();
        let out = knn_quantile_fit_predict(&split, &QuantileLevels::fine_grid()).unwrap();
        assert_eq!(out[0], vec![16.0; 19]);
        assert_eq!(out[1], vec![0.0; 19]);
        assert_eq!(out[2], vec![64.0; 19]);
    }

    #[test]
    fn too_few_rows() {
        let split = TabularSplit::new(matrix(vec![vec![1.0]; 2]), vec![1.0, 2.0], matrix(vec![vec![0.0]])).unwrap();
        assert!(matches!(
            knn_quantile_fit_predict(&split, &QuantileLevels::fine_grid()),
            Err(RegressError::TooFewRows { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn weighted_quantile_steps() {
        let pairs = vec![(3.0, 1.0, 0), (1.0, 1.0, 1), (2.0, 1.0, 2), (4.0, 1.0, 3)];
        assert_eq!(weighted_quantiles(pairs, &[0.1, 0.25, 0.26, 0.5, 0.9]), vec![1.0, 1.0, 2.0, 2.0, 4.0]);
    }

    #[test]
    fn output_is_monotone_and_deterministic() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 * 0.3).sin(), i as f64]).collect();
        let y: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let test = matrix((50..60).map(|i| vec![(i as f64 * 0.3).sin(), i as f64]).collect());
        let split = TabularSplit::new(matrix(x), y, test).unwrap();
        let a = knn_quantile_fit_predict(&split, &QuantileLevels::fine_grid()).unwrap();
        let b = knn_quantile_fit_predict(&split, &QuantileLevels::fine_grid()).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|row| row.windows(2).all(|w| w[0] <= w[1])));
    }
}
