//! Dense Hungarian solver with deterministic tie-breaking.

/// Absolute slack under which two assignment totals count as equal.
const TIE_EPS: f64 = 1e-12;

/// Minimum-cost perfect matching on a square matrix (shortest augmenting
/// path with potentials). Returns `row -> column` and the total cost.
fn solve_square(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row (1-based) matched to column j; way[j]: previous column on the path
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    let total = row_to_col.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    (row_to_col, total)
}

/// Optimal cost of the sub-problem left after removing `rows` and `cols`.
fn residual_cost(cost: &[Vec<f64>], row_free: &[bool], col_free: &[bool]) -> f64 {
    let rows: Vec<usize> = (0..cost.len()).filter(|&r| row_free[r]).collect();
    let cols: Vec<usize> = (0..cost.len()).filter(|&c| col_free[c]).collect();
    let sub: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| cost[r][c]).collect())
        .collect();
    solve_square(&sub).1
}

/// Maximum-total-weight assignment between rows and columns of a rectangular
/// `weights` matrix (IoU in practice). Every row or column on the smaller side
/// is assigned, with no minimum weight.
///
/// Solved as min-cost on `1 - w`, padded to square with cost 1. Among equal
/// optima the lexicographically smallest `(row, col)` pair set is returned.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let n = rows.max(cols);
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| if r < rows && c < cols { 1.0 - weights[r][c] } else { 1.0 })
                .collect()
        })
        .collect();
    let (_, optimum) = solve_square(&cost);

    // Fix rows in order, each to the smallest column that keeps the optimum reachable.
    let mut row_free = vec![true; n];
    let mut col_free = vec![true; n];
    let mut fixed_cost = 0.0;
    let mut pairs = Vec::new();
    for r in 0..n {
        row_free[r] = false;
        let mut chosen = None;
        let mut tried_padding = false;
        for c in 0..n {
            if !col_free[c] {
                continue;
            }
            // padding columns are interchangeable; only try the first free one
            if c >= cols {
                if tried_padding {
                    continue;
                }
                tried_padding = true;
            }
            col_free[c] = false;
            let total = fixed_cost + cost[r][c] + residual_cost(&cost, &row_free, &col_free);
            if total <= optimum + TIE_EPS {
                chosen = Some(c);
                fixed_cost += cost[r][c];
                break;
            }
            col_free[c] = true;
        }
        let c = chosen.expect("some column always attains the optimum");
        if r < rows && c < cols {
            pairs.push((r, c));
        }
    }
    pairs
}
