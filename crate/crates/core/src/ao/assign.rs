//! Subchannel assignment from the indicator matrix `H` (SUs x subchannels).

use ndarray::Array2;

/// Per-subchannel winner `argmax_k H[k, c]`, lowest index on ties.
pub fn channel_winners(h: &Array2<f64>) -> Vec<usize> {
    h.columns()
        .into_iter()
        .map(|col| {
            let mut best = 0;
            for (k, &v) in col.iter().enumerate().skip(1) {
                if v > col[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Subchannel of every SU.
///
/// When the per-subchannel winners form a one-to-one map they are optimal
/// and returned as is. Otherwise every injective map is enumerated and the
/// one with the largest total wins. Among equal totals the map whose
/// weights, sorted in decreasing order, are lexicographically larger is
/// preferred, then the lexicographically smallest map.
pub fn assign_subchannels(h: &Array2<f64>) -> Vec<usize> {
    let (k_n, c_n) = h.dim();
    if k_n == 0 {
        return Vec::new();
    }
    if k_n == c_n {
        let winners = channel_winners(h);
        let mut of_su = vec![usize::MAX; k_n];
        for (c, &k) in winners.iter().enumerate() {
            of_su[k] = c;
        }
        if of_su.iter().all(|&c| c != usize::MAX) {
            return of_su;
        }
    }
    let mut best: Option<(f64, Vec<f64>, Vec<usize>)> = None;
    let mut map = Vec::with_capacity(k_n);
    let mut used = vec![false; c_n];
    search(h, &mut map, &mut used, &mut best);
    best.expect("at least one injective map exists when K <= C").2
}

fn search(h: &Array2<f64>, map: &mut Vec<usize>, used: &mut [bool], best: &mut Option<(f64, Vec<f64>, Vec<usize>)>) {
    let k = map.len();
    if k == h.nrows() {
        let mut w: Vec<f64> = map.iter().enumerate().map(|(k, &c)| h[[k, c]]).collect();
        let total: f64 = w.iter().sum();
        w.sort_by(|a, b| b.total_cmp(a));
        let better = match best {
            None => true,
            Some((t, bw, _)) => total > *t || (total == *t && w.iter().zip(bw.iter()).find(|(a, b)| a != b).is_some_and(|(a, b)| a > b)),
        };
        if better {
            *best = Some((total, w, map.clone()));
        }
        return;
    }
    for c in 0..used.len() {
        if !used[c] {
            used[c] = true;
            map.push(c);
            search(h, map, used, best);
            map.pop();
            used[c] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn examples() {
        assert_eq!(assign_subchannels(&array![[3.0, 1.0], [2.0, 4.0]]), vec![0, 1]);
        assert_eq!(assign_subchannels(&array![[5.0, 6.0], [1.0, 2.0]]), vec![1, 0]);
        assert_eq!(assign_subchannels(&array![[2.0, 7.0], [2.0, 7.0]]), vec![0, 1]);
    }

    #[test]
    fn fewer_sus_than_channels() {
        assert_eq!(assign_subchannels(&array![[1.0, 3.0, 2.0]]), vec![1]);
        assert_eq!(assign_subchannels(&array![[1.0, 3.0, 2.0], [0.0, 5.0, 4.0]]), vec![2, 1]);
    }
}
