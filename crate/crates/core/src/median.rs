//! Weighted geometric median by the Vardi–Zhang modification of Weiszfeld's
//! iteration, which stays well defined when an iterate lands on a data point.

use crate::error::{Error, Result};
use crate::measure::sq_dist;

/// Points with positive weights; coincident inputs are merged on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianProblem {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl MedianProblem {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                left: points.len(),
                right: weights.len(),
            });
        }
        let d = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: p.len() });
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidWeights("median weights must be positive".into()));
        }
        let mut merged_pts: Vec<Vec<f64>> = Vec::with_capacity(points.len());
        let mut merged_w: Vec<f64> = Vec::with_capacity(points.len());
        for (p, w) in points.into_iter().zip(weights) {
            match merged_pts.iter().position(|q| *q == p) {
                Some(i) => merged_w[i] += w,
                None => {
                    merged_pts.push(p);
                    merged_w.push(w);
                }
            }
        }
        Ok(Self {
            points: merged_pts,
            weights: merged_w,
            tol: 1e-9,
            max_iter: 1000,
        })
    }

    pub fn with_tolerance(mut self, tol: f64, max_iter: usize) -> Self {
        self.tol = tol;
        self.max_iter = max_iter;
        self
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ η_i ‖X_i − x‖`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * sq_dist(p, x).sqrt())
            .sum()
    }

    pub fn weighted_mean(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        let mut m = vec![0.0; self.points[0].len()];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (mi, pi) in m.iter_mut().zip(p) {
                *mi += w * pi / total;
            }
        }
        m
    }

    /// `‖R̃(X_k)‖ ≤ η_k` certifies that data point `k` is a global minimizer.
    fn data_point_optimal(&self, k: usize) -> bool {
        let x = &self.points[k];
        let mut r = vec![0.0; x.len()];
        for (i, (p, w)) in self.points.iter().zip(&self.weights).enumerate() {
            if i == k {
                continue;
            }
            let dist = sq_dist(p, x).sqrt();
            for (ri, (pi, xi)) in r.iter_mut().zip(p.iter().zip(x)) {
                *ri += w * (pi - xi) / dist;
            }
        }
        r.iter().map(|v| v * v).sum::<f64>().sqrt() <= self.weights[k]
    }

    /// One VZ update; returns the next iterate.
    fn step(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut eta = 0.0;
        let mut denom = 0.0;
        let mut t = vec![0.0; d];
        let mut r = vec![0.0; d];
        for (p, w) in self.points.iter().zip(&self.weights) {
            let dist = sq_dist(p, x).sqrt();
            if dist == 0.0 {
                eta += w;
                continue;
            }
            denom += w / dist;
            for c in 0..d {
                t[c] += w * p[c] / dist;
                r[c] += w * (p[c] - x[c]) / dist;
            }
        }
        if denom == 0.0 {
            // Every point coincides with x.
            return x.to_vec();
        }
        t.iter_mut().for_each(|v| *v /= denom);
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        // 0/0 = 0 convention for η/r.
        let ratio = if eta == 0.0 { 0.0 } else { eta / rn };
        let keep = ratio.min(1.0);
        let move_w = (1.0 - ratio).max(0.0);
        (0..d).map(|c| move_w * t[c] + keep * x[c]).collect()
    }
}

/// Outcome of a median solve, including the objective after every update.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianResult {
    pub point: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub last_step: f64,
    pub objective_trace: Vec<f64>,
}

/// Runs VZ until the step norm drops below `tol`; never errors on the cap.
pub fn geometric_median_trace(problem: &MedianProblem, init: Option<&[f64]>) -> Result<MedianResult> {
    let mut x = match init {
        Some(p) if p.len() != problem.points[0].len() => {
            return Err(Error::DimensionMismatch {
                expected: problem.points[0].len(),
                got: p.len(),
            })
        }
        Some(p) if p.iter().any(|v| !v.is_finite()) => {
            return Err(Error::InvalidParameter("median init must be finite".into()))
        }
        Some(p) => p.to_vec(),
        None => problem.weighted_mean(),
    };
    let mut trace = vec![problem.objective(&x)];
    // A data point satisfying the optimality condition is the exact answer;
    // checking up front avoids the slow approach to such vertices.
    if let Some(k) = (0..problem.points.len()).find(|&k| problem.data_point_optimal(k)) {
        let point = problem.points[k].clone();
        let obj = problem.objective(&point);
        if obj <= trace[0] {
            trace.push(obj);
            let last_step = sq_dist(&point, &x).sqrt();
            return Ok(MedianResult {
                point,
                iterations: 1,
                converged: true,
                last_step,
                objective_trace: trace,
            });
        }
    }
    let mut last_step = f64::INFINITY;
    for it in 1..=problem.max_iter {
        let next = problem.step(&x);
        last_step = sq_dist(&next, &x).sqrt();
        x = next;
        trace.push(problem.objective(&x));
        if last_step < problem.tol {
            return Ok(MedianResult {
                point: x,
                iterations: it,
                converged: true,
                last_step,
                objective_trace: trace,
            });
        }
    }
    Ok(MedianResult {
        point: x,
        iterations: problem.max_iter,
        converged: false,
        last_step,
        objective_trace: trace,
    })
}

/// Weighted geometric median `argmin_x Σ η_i ‖X_i − x‖`, started from `init`
/// or the weighted mean.
pub fn weighted_geometric_median(problem: &MedianProblem, init: Option<&[f64]>) -> Result<Vec<f64>> {
    let res = geometric_median_trace(problem, init)?;
    if !res.converged {
        return Err(Error::MedianNotConverged {
            iterations: res.iterations,
            point: res.point,
            step: res.last_step,
        });
    }
    Ok(res.point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_oracle(problem: &MedianProblem, lo: [f64; 2], hi: [f64; 2]) -> (Vec<f64>, f64) {
        // Coarse grid, then two zoomed refinements around the best cell.
        let (mut lo, mut hi) = (lo, hi);
        let mut best = (vec![0.0, 0.0], f64::INFINITY);
        for _ in 0..4 {
            let n = 200;
            for i in 0..=n {
                for j in 0..=n {
                    let x = vec![
                        lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64,
                        lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64,
                    ];
                    let v = problem.objective(&x);
                    if v < best.1 {
                        best = (x, v);
                    }
                }
            }
            let w = [(hi[0] - lo[0]) / 20.0, (hi[1] - lo[1]) / 20.0];
            lo = [best.0[0] - w[0], best.0[1] - w[1]];
            hi = [best.0[0] + w[0], best.0[1] + w[1]];
        }
        best
    }

    #[test]
    fn single_point() {
        let p = MedianProblem::new(vec![vec![1.5, -2.0]], vec![3.0]).unwrap();
        assert_eq!(weighted_geometric_median(&p, None).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn dominant_weight_is_exact() {
        let p = MedianProblem::new(vec![vec![0.0, 0.0], vec![4.0, 1.0], vec![-1.0, 3.0]], vec![2.0, 1.0, 1.0]).unwrap();
        assert_eq!(weighted_geometric_median(&p, None).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn equilateral_fermat_point() {
        let h = 3f64.sqrt() / 2.0;
        let p = MedianProblem::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]], vec![1.0; 3]).unwrap();
        let x = weighted_geometric_median(&p, Some(&[0.9, 0.1])).unwrap();
        let (g, _) = grid_oracle(&p, [0.0, 0.0], [1.0, 1.0]);
        assert!((x[0] - g[0]).abs() < 1e-4 && (x[1] - g[1]).abs() < 1e-4);
        assert!((x[0] - 0.5).abs() < 1e-6 && (x[1] - h / 3.0).abs() < 1e-6);
    }

    #[test]
    fn coincident_points_merge() {
        let p = MedianProblem::new(vec![vec![1.0], vec![1.0], vec![5.0]], vec![1.0, 1.0, 1.5]).unwrap();
        assert_eq!(p.points().len(), 2);
        assert_eq!(p.weights(), &[2.0, 1.5]);
        assert!(MedianProblem::new(vec![vec![1.0]], vec![0.0]).is_err());
    }

    #[test]
    fn iteration_cap_reports_last_iterate() {
        let p = MedianProblem::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![3.0, 3.0]], vec![1.0; 4])
            .unwrap()
            .with_tolerance(1e-300, 2);
        match weighted_geometric_median(&p, None) {
            Err(Error::MedianNotConverged { iterations, point, step }) => {
                assert_eq!(iterations, 2);
                assert_eq!(point.len(), 2);
                assert!(step > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn starts_on_a_data_point() {
        let p = MedianProblem::new(vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0], vec![2.0, 2.0]], vec![1.0; 4]).unwrap();
        let x = weighted_geometric_median(&p, Some(&[0.0, 0.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn beats_grid_oracle_and_descends(seed in any::<u64>(), m in 2usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
            let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
            let p = MedianProblem::new(pts, w).unwrap();
            let res = geometric_median_trace(&p, None).unwrap();
            // Optima just off a data point are approached sublinearly.
            prop_assert!(res.converged || res.last_step < 1e-6);
            for pair in res.objective_trace.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-12);
            }
            let (_, best) = grid_oracle(&p, [0.0, 0.0], [1.0, 1.0]);
            prop_assert!(p.objective(&res.point) <= best + 1e-5);
        }

        #[test]
        fn equivariant_under_rigid_motion(seed in any::<u64>(), angle in 0.0f64..6.28, shift in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let w: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..1.0)).collect();
            let (s, c) = angle.sin_cos();
            let rot = |p: &[f64]| vec![c * p[0] - s * p[1] + shift, s * p[0] + c * p[1] - shift];
            let moved: Vec<Vec<f64>> = pts.iter().map(|p| rot(p)).collect();
            // Near a data point VZ converges sublinearly, so compare values.
            let pm = MedianProblem::new(moved.clone(), w.clone()).unwrap();
            let x = geometric_median_trace(&MedianProblem::new(pts, w).unwrap(), None).unwrap().point;
            let y = geometric_median_trace(&pm, None).unwrap().point;
            let rx = rot(&x);
            prop_assert!((pm.objective(&rx) - pm.objective(&y)).abs() < 1e-7);
        }
    }
}
