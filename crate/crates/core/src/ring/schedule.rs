/// Round-robin window assignment. Entry `k` lists the windows handled by
/// processing module `k`, in issue order.
pub fn control_schedule(n_processing: usize, window_count: usize) -> Vec<Vec<usize>> {
    control_schedule_from(n_processing, window_count, 0)
}

/// Round-robin assignment that hands window 0 to module `start`. Chaining
/// `start` across consecutive images keeps the long-run load exactly even.
pub fn control_schedule_from(n_processing: usize, window_count: usize, start: usize) -> Vec<Vec<usize>> {
    assert!(n_processing >= 1, "at least one processing module");
    let mut map = vec![Vec::with_capacity(window_count / n_processing + 1); n_processing];
    for w in 0..window_count {
        map[(w + start) % n_processing].push(w);
    }
    map
}

/// Module handling window `w` of image pair `pair`.
pub fn assigned_module(n_processing: usize, window_count: usize, pair: usize, w: usize) -> usize {
    (w + pair * window_count) % n_processing
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loads(map: &[Vec<usize>]) -> Vec<usize> {
        map.iter().map(Vec::len).collect()
    }

    #[test]
    fn even_split() {
        assert_eq!(loads(&control_schedule(2, 80)), vec![40, 40]);
        assert_eq!(loads(&control_schedule(1, 80)), vec![80]);
        assert_eq!(loads(&control_schedule(3, 80)), vec![27, 27, 26]);
        assert_eq!(control_schedule(3, 5), vec![vec![0, 3], vec![1, 4], vec![2]]);
    }

    #[test]
    fn rotation_balances_over_n_images() {
        for n in 1..=7 {
            let mut total = vec![0; n];
            for pair in 0..n {
                let map = control_schedule_from(n, 80, pair * 80 % n);
                for (k, ws) in map.iter().enumerate() {
                    total[k] += ws.len();
                    assert!(ws.iter().all(|&w| assigned_module(n, 80, pair, w) == k));
                }
            }
            assert!(total.iter().all(|&t| t == 80), "{n}: {total:?}");
        }
    }
}
