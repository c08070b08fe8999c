//! One-dimensional sensing-time search.

/// Grid point `i` of `points` over `[lo, hi]`. Nested grids (`n` and
/// `2n - 1` points) share their common points bit for bit.
pub fn grid_point(lo: f64, hi: f64, points: usize, i: usize) -> f64 {
    if points < 2 {
        return lo;
    }
    lo + (hi - lo) * (i as f64 / (points - 1) as f64)
}

/// Best `tau` on a uniform grid. `eval(tau)` returns the objective and the
/// false-alarm slack. Points with negative slack are discarded and ties go
/// to the smallest `tau`. When no point is feasible the least violating one
/// is returned.
pub fn search_sensing_time(lo: f64, hi: f64, points: usize, mut eval: impl FnMut(f64) -> (f64, f64)) -> f64 {
    let mut feasible: Option<(f64, f64)> = None;
    let mut least_bad: Option<(f64, f64)> = None;
    for i in 0..points.max(1) {
        let tau = grid_point(lo, hi, points, i);
        let (obj, slack) = eval(tau);
        if slack >= 0.0 {
            if feasible.is_none_or(|(_, best)| obj > best) {
                feasible = Some((tau, obj));
            }
        } else if least_bad.is_none_or(|(_, best)| slack > best) {
            least_bad = Some((tau, slack));
        }
    }
    feasible.or(least_bad).map_or(lo, |(tau, _)| tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_objective_takes_lowest_tau() {
        assert_eq!(search_sensing_time(0.001, 0.099, 50, |_| (3.0, 1.0)), 0.001);
    }

    #[test]
    fn infeasible_points_are_skipped() {
        let tau = search_sensing_time(0.0, 1.0, 11, |t| (-t, t - 0.45));
        assert!((tau - 0.5).abs() < 1e-15);
        let tau = search_sensing_time(0.0, 1.0, 11, |t| (1.0, t - 2.0));
        assert_eq!(tau, 1.0);
    }

    #[test]
    fn nested_grids_share_points() {
        for i in 0..10 {
            assert_eq!(grid_point(0.001, 0.099, 10, i), grid_point(0.001, 0.099, 19, 2 * i));
        }
    }
}
