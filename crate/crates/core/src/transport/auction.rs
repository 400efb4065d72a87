//! Forward (Gauss–Seidel) auction with ε-scaling for min-cost assignment.

use std::collections::VecDeque;

const UNASSIGNED: usize = usize::MAX;

/// Default ε sequence: start at a quarter of the largest cost and halve until
/// ε falls below `1e-4 ×` the mean cost. The last entry is that first value below.
pub fn default_schedule(cost: &[f64]) -> Vec<f64> {
    let max = cost.iter().copied().fold(0.0f64, f64::max);
    let mean = cost.iter().sum::<f64>() / cost.len().max(1) as f64;
    if max <= 0.0 {
        return Vec::new();
    }
    let floor = 1e-4 * mean;
    let mut eps = max / 4.0;
    let mut schedule = vec![eps];
    while eps >= floor {
        eps /= 2.0;
        schedule.push(eps);
    }
    schedule
}

/// Runs one auction phase per ε in `schedule`, keeping prices between phases.
/// The result costs at most `n · ε_last` more than the optimum.
pub(crate) fn solve(cost: &[f64], n: usize, schedule: &[f64]) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    let mut price = vec![0.0f64; n];
    let mut owner = vec![UNASSIGNED; n];
    let mut assigned = vec![UNASSIGNED; n];

    if schedule.is_empty() || n == 1 {
        return (0..n).collect();
    }

    for &eps in schedule {
        owner.fill(UNASSIGNED);
        assigned.fill(UNASSIGNED);
        let mut queue: VecDeque<usize> = (0..n).collect();
        while let Some(person) = queue.pop_front() {
            let row = &cost[person * n..(person + 1) * n];
            let mut best = f64::NEG_INFINITY;
            let mut second = f64::NEG_INFINITY;
            let mut best_j = 0usize;
            for (j, (&c, &p)) in row.iter().zip(&price).enumerate() {
                let value = -c - p;
                if value > best {
                    second = best;
                    best = value;
                    best_j = j;
                } else if value > second {
                    second = value;
                }
            }
            price[best_j] += best - second + eps;
            let previous = owner[best_j];
            if previous != UNASSIGNED {
                assigned[previous] = UNASSIGNED;
                queue.push_back(previous);
            }
            owner[best_j] = person;
            assigned[person] = best_j;
        }
    }
    assigned
}
